//! Deterministic miniature proof oracle used in place of a real proof
//! assistant for tests and desk-scale runs.
//!
//! A toy statement is `theorem <name> : <int-expr> = <int-expr> :=` where the
//! expressions are closed 64-bit integer arithmetic (`+ - *`, parentheses,
//! unary minus). Proof semantics:
//!
//! - `eval` closes a goal iff both sides evaluate to the same integer;
//! - `sorry` admits any goal (this is what makes the compiling-correctness
//!   test meaningful: a parseable statement always elaborates with `sorry`);
//! - `sleep <ms>` blocks for that duration, then fails — it exists to
//!   exercise timeout handling;
//! - `have <name> : <goal> := by <body>` blocks are checked recursively
//!   against their own equation, so a proof assembled from independently
//!   verified sub-proofs verifies as a whole;
//! - anything else fails.
//!
//! A block must consist of have-introductions followed by exactly one closing
//! tactic. Identical inputs always produce identical verdicts.

use std::time::{Duration, Instant};

use crate::backend::BackendError;
use crate::sketch::{parse_have_blocks, SketchNode};
use crate::text::offset_to_line_col;

use super::{CheckJob, CheckerBackend, Diagnostic, Verdict};

/// Granularity of the cooperative sleep loop.
const SLEEP_CHUNK_MS: u64 = 5;

#[derive(Debug, Default, Clone)]
pub struct ToyChecker;

impl ToyChecker {
    pub fn new() -> Self {
        ToyChecker
    }
}

impl CheckerBackend for ToyChecker {
    fn check(&self, job: &CheckJob) -> Result<Verdict, BackendError> {
        Ok(check_source(
            &job.statement.body,
            &job.proof_text,
            job.timeout,
        ))
    }
}

/// Check a statement body plus proof text under a wall-clock timeout.
pub fn check_source(body: &str, proof_text: &str, timeout: Duration) -> Verdict {
    let started = Instant::now();
    let deadline = started + timeout;
    let outcome = run_check(body, proof_text, deadline);
    let elapsed = started.elapsed().as_millis() as u64;
    let timeout_ms = timeout.as_millis() as u64;
    // a verdict reached only after the deadline is still a timeout
    if elapsed > timeout_ms {
        return Verdict::timeout(elapsed);
    }
    match outcome {
        CheckOutcome::Pass => Verdict::pass(elapsed),
        CheckOutcome::Fail(diag) => Verdict::fail(vec![diag], elapsed),
        CheckOutcome::Timeout => Verdict::timeout(elapsed.max(timeout_ms)),
    }
}

enum CheckOutcome {
    Pass,
    Fail(Diagnostic),
    Timeout,
}

fn fail_at(text: &str, offset: usize, message: impl Into<String>) -> CheckOutcome {
    let (line, col) = offset_to_line_col(text, offset);
    CheckOutcome::Fail(Diagnostic::new(message, line, col))
}

fn run_check(body: &str, proof_text: &str, deadline: Instant) -> CheckOutcome {
    // 1. the statement itself must parse: locate delimiter, parse equation
    let delim = {
        let first = match body.find(":=") {
            Some(p) => p,
            None => return fail_at(body, body.len(), "missing proof delimiter `:=`"),
        };
        let after = &body[first + 2..];
        if after.contains(":=") || !after.trim().is_empty() {
            return fail_at(body, first, "ambiguous proof delimiter");
        }
        first
    };
    let decl = &body[..delim];
    let goal_start = match goal_colon(decl) {
        Some(p) => p,
        None => {
            return fail_at(
                body,
                0,
                "malformed declaration: expected `theorem <name> : <goal>`",
            )
        }
    };
    if !decl.trim_start().starts_with("theorem") {
        return fail_at(body, 0, "malformed declaration: expected `theorem` keyword");
    }
    let goal_text = decl[goal_start + 1..].trim();
    let goal = match parse_equation(goal_text) {
        Ok(eq) => eq,
        Err(e) => return fail_at(body, goal_start, format!("malformed goal: {e}")),
    };

    // 2. the proof must parse into the supported block grammar
    let tree = match parse_have_blocks(proof_text) {
        Ok(t) => t,
        Err(e) => {
            let offset = match &e {
                crate::sketch::SketchError::Parse { offset, .. } => *offset,
                _ => 0,
            };
            return fail_at(proof_text, offset, format!("proof does not parse: {e}"));
        }
    };

    check_block(proof_text, &tree.root, &goal, deadline, true)
}

/// Find the top-level colon introducing the goal (skipping binder groups).
fn goal_colon(decl: &str) -> Option<usize> {
    let mut depth = 0i32;
    let bytes = decl.as_bytes();
    for (idx, &b) in bytes.iter().enumerate() {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b':' if depth == 0 => {
                if bytes.get(idx + 1) == Some(&b'=') {
                    continue;
                }
                return Some(idx);
            }
            _ => {}
        }
    }
    None
}

/// Check one block: every have child must verify against its own equation,
/// and exactly one closing tactic must close this block's goal.
fn check_block(
    text: &str,
    node: &SketchNode,
    goal: &Equation,
    deadline: Instant,
    is_root: bool,
) -> CheckOutcome {
    if Instant::now() >= deadline {
        return CheckOutcome::Timeout;
    }
    for child in &node.children {
        let child_goal = match parse_equation(&child.subgoal_text) {
            Ok(eq) => eq,
            Err(e) => {
                return fail_at(
                    text,
                    child.extent_span.0,
                    format!("subgoal `{}` is malformed: {e}", child.name),
                );
            }
        };
        match check_block(text, child, &child_goal, deadline, false) {
            CheckOutcome::Pass => {}
            other => return other,
        }
    }

    // closing tactics: lines of this block's body outside all child extents
    let (start, end) = node.body_span;
    let body = &text[start..end];
    let mut tactics: Vec<(usize, &str)> = Vec::new();
    let mut offset = 0;
    for raw in body.split_inclusive('\n') {
        let line = raw.strip_suffix('\n').unwrap_or(raw);
        let abs = start + offset;
        offset += raw.len();
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let line_start = abs + (line.len() - line.trim_start().len());
        let inside_child = node
            .children
            .iter()
            .any(|c| line_start >= c.extent_span.0 && line_start < c.extent_span.1);
        if inside_child {
            continue;
        }
        tactics.push((line_start, trimmed));
    }

    // the root proof may open with a bare `by`
    let mut cleaned: Vec<(usize, &str)> = Vec::new();
    for (pos, tac) in tactics {
        if is_root && cleaned.is_empty() {
            if tac == "by" {
                continue;
            }
            if let Some(rest) = tac.strip_prefix("by ") {
                cleaned.push((pos, rest.trim()));
                continue;
            }
        }
        cleaned.push((pos, tac));
    }

    match cleaned.len() {
        0 => fail_at(text, end, "unsolved goal: block has no closing tactic"),
        1 => {
            let (pos, tactic) = cleaned[0];
            apply_tactic(text, pos, tactic, goal, deadline)
        }
        _ => fail_at(
            text,
            cleaned[1].0,
            "expected exactly one closing tactic per block",
        ),
    }
}

fn apply_tactic(
    text: &str,
    pos: usize,
    tactic: &str,
    goal: &Equation,
    deadline: Instant,
) -> CheckOutcome {
    if tactic == "eval" {
        return match (eval_expr(&goal.lhs), eval_expr(&goal.rhs)) {
            (Ok(l), Ok(r)) if l == r => CheckOutcome::Pass,
            (Ok(l), Ok(r)) => fail_at(
                text,
                pos,
                format!("eval: left side is {l} but right side is {r}"),
            ),
            (Err(e), _) | (_, Err(e)) => fail_at(text, pos, format!("eval: {e}")),
        };
    }
    if tactic == super::ADMIT_PLACEHOLDER {
        return CheckOutcome::Pass;
    }
    if let Some(arg) = tactic.strip_prefix("sleep ") {
        let total_ms: u64 = match arg.trim().parse() {
            Ok(ms) => ms,
            Err(_) => return fail_at(text, pos, "sleep: expected integer milliseconds"),
        };
        let wake = Instant::now() + Duration::from_millis(total_ms);
        loop {
            let now = Instant::now();
            if now >= deadline {
                return CheckOutcome::Timeout;
            }
            if now >= wake {
                break;
            }
            let chunk = Duration::from_millis(SLEEP_CHUNK_MS)
                .min(wake - now)
                .min(deadline - now);
            std::thread::sleep(chunk);
        }
        return fail_at(text, pos, "sleep directive does not close the goal");
    }
    fail_at(text, pos, format!("unknown tactic `{tactic}`"))
}

struct Equation {
    lhs: Expr,
    rhs: Expr,
}

/// Split a goal into `lhs = rhs` at the top bracket level and parse both sides.
fn parse_equation(goal: &str) -> Result<Equation, String> {
    let mut depth = 0i32;
    let mut split = None;
    for (idx, ch) in goal.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '=' if depth == 0 => {
                if split.is_some() {
                    return Err("more than one top-level `=`".into());
                }
                split = Some(idx);
            }
            _ => {}
        }
    }
    let split = split.ok_or_else(|| "expected `<expr> = <expr>`".to_string())?;
    Ok(Equation {
        lhs: parse_expr(&goal[..split])?,
        rhs: parse_expr(&goal[split + 1..])?,
    })
}

#[derive(Debug)]
enum Expr {
    Literal(i64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

fn eval_expr(expr: &Expr) -> Result<i64, String> {
    let overflow = || "arithmetic overflow".to_string();
    match expr {
        Expr::Literal(v) => Ok(*v),
        Expr::Neg(e) => eval_expr(e)?.checked_neg().ok_or_else(overflow),
        Expr::Add(a, b) => eval_expr(a)?
            .checked_add(eval_expr(b)?)
            .ok_or_else(overflow),
        Expr::Sub(a, b) => eval_expr(a)?
            .checked_sub(eval_expr(b)?)
            .ok_or_else(overflow),
        Expr::Mul(a, b) => eval_expr(a)?
            .checked_mul(eval_expr(b)?)
            .ok_or_else(overflow),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(i64),
    Plus,
    Minus,
    Star,
    Open,
    Close,
}

fn tokenize(s: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&ch) = chars.peek() {
        match ch {
            c if c.is_whitespace() => {
                chars.next();
            }
            '0'..='9' => {
                let mut value = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        value.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let parsed: i64 = value
                    .parse()
                    .map_err(|_| format!("integer `{value}` out of range"))?;
                tokens.push(Token::Int(parsed));
            }
            '+' => {
                tokens.push(Token::Plus);
                chars.next();
            }
            '-' => {
                tokens.push(Token::Minus);
                chars.next();
            }
            '*' => {
                tokens.push(Token::Star);
                chars.next();
            }
            '(' => {
                tokens.push(Token::Open);
                chars.next();
            }
            ')' => {
                tokens.push(Token::Close);
                chars.next();
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    // sum := product (('+' | '-') product)*
    fn sum(&mut self) -> Result<Expr, String> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.next();
                    acc = Expr::Add(Box::new(acc), Box::new(self.product()?));
                }
                Some(Token::Minus) => {
                    self.next();
                    acc = Expr::Sub(Box::new(acc), Box::new(self.product()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    // product := atom ('*' atom)*
    fn product(&mut self) -> Result<Expr, String> {
        let mut acc = self.atom()?;
        while self.peek() == Some(&Token::Star) {
            self.next();
            acc = Expr::Mul(Box::new(acc), Box::new(self.atom()?));
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.next() {
            Some(Token::Int(v)) => Ok(Expr::Literal(v)),
            Some(Token::Minus) => Ok(Expr::Neg(Box::new(self.atom()?))),
            Some(Token::Open) => {
                let inner = self.sum()?;
                match self.next() {
                    Some(Token::Close) => Ok(inner),
                    _ => Err("unbalanced parentheses".into()),
                }
            }
            Some(Token::Close) => Err("unbalanced parentheses".into()),
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

fn parse_expr(s: &str) -> Result<Expr, String> {
    let tokens = tokenize(s)?;
    if tokens.is_empty() {
        return Err("empty expression".into());
    }
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.sum()?;
    if parser.pos != parser.tokens.len() {
        return Err("trailing tokens in expression".into());
    }
    Ok(expr)
}
