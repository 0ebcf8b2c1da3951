//! Divide-and-conquer proof pipeline: parse a structured proof into
//! have-blocks, keep only the sketch, extract independent subproblems, solve
//! each with a prover backend, and reassemble a full proof. Also hosts the
//! goal-equation extraction hook for an external symbolic simplifier.
//!
//! Supported structured-proof grammar: indentation-delimited blocks. A
//! have-introduction is a single line `have <name> : <goal> := by` followed
//! by a strictly-more-indented body (or an inline body on the same line
//! after `by`). Brackets must balance across the proof. Anything else that
//! starts with `have` is rejected with a position-bearing error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::corpus::FormalStatement;
use crate::prover::{ProveRequest, ProverBackend};
use crate::seeded::derived_seed;
use crate::verify::{CheckJob, CheckerBackend, VerdictStatus, DEFAULT_TIMEOUT_MS};

/// Placeholder written in place of a stripped have-body.
pub const SKETCH_PLACEHOLDER: &str = "sorry";

/// Default number of prover samples per subproblem.
pub const DEFAULT_SUBPROBLEM_ATTEMPTS: u32 = 32;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("parse error at offset {offset} (line {line}, col {col}): {message}")]
    Parse {
        offset: usize,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("no subproof supplied for node `{node}`")]
    MissingSubproof { node: String },
    #[error("statement `{id}` has no proof delimiter")]
    NoDelimiter { id: String },
}

impl SketchError {
    fn parse(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, col) = crate::text::offset_to_line_col(text, offset);
        SketchError::Parse {
            offset,
            line,
            col,
            message: message.into(),
        }
    }
}

/// One have-introduction in a structured proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchNode {
    pub name: String,
    pub subgoal_text: String,
    /// Byte span of the sub-proof body in the source text.
    pub body_span: (usize, usize),
    /// Byte span from the `have` keyword through the end of the body.
    pub extent_span: (usize, usize),
    pub depth: u32,
    pub children: Vec<SketchNode>,
}

/// Parse result: a root node covering the whole proof, with one child per
/// top-level have-introduction (nested haves become grandchildren).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchTree {
    pub root: SketchNode,
}

impl SketchTree {
    pub fn top_level(&self) -> &[SketchNode] {
        &self.root.children
    }

    /// Total number of have nodes (all depths).
    pub fn node_count(&self) -> usize {
        fn walk(n: &SketchNode) -> usize {
            n.children.len() + n.children.iter().map(walk).sum::<usize>()
        }
        walk(&self.root)
    }
}

struct Line<'a> {
    start: usize,
    content: &'a str,
    indent: usize,
    blank: bool,
}

fn split_lines(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    let mut start = 0;
    for segment in text.split_inclusive('\n') {
        let raw = segment.strip_suffix('\n').unwrap_or(segment);
        let trimmed = raw.trim_start();
        lines.push(Line {
            start,
            content: raw,
            indent: raw.len() - trimmed.len(),
            blank: trimmed.is_empty(),
        });
        start += segment.len();
    }
    lines
}

fn check_brackets(text: &str) -> Result<(), SketchError> {
    let mut stack: Vec<(char, usize)> = Vec::new();
    for (idx, ch) in text.char_indices() {
        match ch {
            '(' | '[' | '{' => stack.push((ch, idx)),
            ')' | ']' | '}' => {
                let expected = match ch {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, _)) if open == expected => {}
                    _ => {
                        return Err(SketchError::parse(text, idx, format!("unbalanced `{ch}`")));
                    }
                }
            }
            _ => {}
        }
    }
    if let Some((open, idx)) = stack.pop() {
        return Err(SketchError::parse(text, idx, format!("unclosed `{open}`")));
    }
    Ok(())
}

/// Locate `:=` at bracket depth 0 within a line, returning its byte offset.
fn top_level_assign(content: &str) -> Option<usize> {
    let mut depth = 0i32;
    let bytes = content.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b':' if depth == 0 && i + 1 < bytes.len() && bytes[i + 1] == b'=' => return Some(i),
            _ => {}
        }
        i += 1;
    }
    None
}

struct HaveIntro<'a> {
    name: &'a str,
    subgoal: &'a str,
    /// Text after `by` on the same line (inline body), if non-empty.
    inline_rest: Option<(usize, usize)>, // span relative to line content
}

/// Recognize `have <name> : <goal> := by [inline]`. Lines not starting with
/// the `have` keyword return `Ok(None)`; malformed haves are errors.
fn parse_have_intro<'a>(
    text: &str,
    line_start: usize,
    content: &'a str,
) -> Result<Option<HaveIntro<'a>>, SketchError> {
    let trimmed = content.trim_start();
    let indent = content.len() - trimmed.len();
    if !(trimmed.starts_with("have ") || trimmed.starts_with("have\t")) {
        return Ok(None);
    }
    let rest = &trimmed["have".len()..];
    let assign = match top_level_assign(rest) {
        Some(pos) => pos,
        None => {
            return Err(SketchError::parse(
                text,
                line_start + indent,
                "unsupported have form: expected `have <name> : <goal> := by`",
            ));
        }
    };
    let head = &rest[..assign];
    let colon = match head.find(':') {
        Some(pos) => pos,
        None => {
            return Err(SketchError::parse(
                text,
                line_start + indent,
                "unsupported have form: missing `:` before goal",
            ));
        }
    };
    let name = head[..colon].trim();
    let subgoal = head[colon + 1..].trim();
    if name.is_empty() || name.contains(char::is_whitespace) || subgoal.is_empty() {
        return Err(SketchError::parse(
            text,
            line_start + indent,
            "unsupported have form: expected `have <name> : <goal> := by`",
        ));
    }
    let after_assign = &rest[assign + 2..];
    let by_rel = match after_assign.trim_start().strip_prefix("by") {
        Some(tail) if tail.is_empty() || tail.starts_with(char::is_whitespace) => {
            let ws = after_assign.len() - after_assign.trim_start().len();
            assign + 2 + ws + 2
        }
        _ => {
            return Err(SketchError::parse(
                text,
                line_start + indent,
                "unsupported have form: proof must start with `by`",
            ));
        }
    };
    // offsets above are relative to `rest`; shift to line content
    let base = indent + "have".len();
    let inline = &rest[by_rel..];
    let inline_trimmed = inline.trim();
    let inline_rest = if inline_trimmed.is_empty() {
        None
    } else {
        let lead = inline.len() - inline.trim_start().len();
        let start = base + by_rel + lead;
        Some((start, start + inline_trimmed.len()))
    };
    Ok(Some(HaveIntro {
        name,
        subgoal,
        inline_rest,
    }))
}

fn parse_block(
    text: &str,
    lines: &[Line<'_>],
    mut idx: usize,
    end: usize,
    depth: u32,
) -> Result<(Vec<SketchNode>, usize), SketchError> {
    let mut nodes = Vec::new();
    while idx < end {
        let line = &lines[idx];
        if line.blank {
            idx += 1;
            continue;
        }
        match parse_have_intro(text, line.start, line.content)? {
            None => {
                idx += 1;
            }
            Some(intro) => {
                let extent_start = line.start + line.indent;
                if let Some((rel_start, rel_end)) = intro.inline_rest {
                    let body_span = (line.start + rel_start, line.start + rel_end);
                    nodes.push(SketchNode {
                        name: intro.name.to_string(),
                        subgoal_text: intro.subgoal.to_string(),
                        body_span,
                        extent_span: (extent_start, body_span.1),
                        depth: depth + 1,
                        children: Vec::new(),
                    });
                    idx += 1;
                    continue;
                }
                // multi-line body: following lines strictly more indented
                let have_indent = line.indent;
                let mut j = idx + 1;
                let mut last_body: Option<usize> = None;
                while j < end {
                    let candidate = &lines[j];
                    if candidate.blank {
                        j += 1;
                        continue;
                    }
                    if candidate.indent > have_indent {
                        last_body = Some(j);
                        j += 1;
                    } else {
                        break;
                    }
                }
                let last = match last_body {
                    Some(l) => l,
                    None => {
                        return Err(SketchError::parse(
                            text,
                            extent_start,
                            format!("have `{}` has an empty body", intro.name),
                        ));
                    }
                };
                let body_first = (idx + 1..=last).find(|&k| !lines[k].blank).unwrap();
                let body_start = lines[body_first].start + lines[body_first].indent;
                let body_end = lines[last].start + lines[last].content.trim_end().len();
                let (children, _) = parse_block(text, lines, body_first, last + 1, depth + 1)?;
                nodes.push(SketchNode {
                    name: intro.name.to_string(),
                    subgoal_text: intro.subgoal.to_string(),
                    body_span: (body_start, body_end),
                    extent_span: (extent_start, body_end),
                    depth: depth + 1,
                    children,
                });
                idx = last + 1;
            }
        }
    }
    Ok((nodes, idx))
}

/// Parse a structured proof into its have-block tree.
pub fn parse_have_blocks(proof_text: &str) -> Result<SketchTree, SketchError> {
    check_brackets(proof_text)?;
    let lines = split_lines(proof_text);
    let (children, _) = parse_block(proof_text, &lines, 0, lines.len(), 0)?;
    Ok(SketchTree {
        root: SketchNode {
            name: String::new(),
            subgoal_text: String::new(),
            body_span: (0, proof_text.len()),
            extent_span: (0, proof_text.len()),
            depth: 0,
            children,
        },
    })
}

/// Replace every top-level have body with the admit placeholder, preserving
/// all other text byte-exact.
pub fn strip_subproofs(tree: &SketchTree, proof_text: &str) -> String {
    let mut out = String::with_capacity(proof_text.len());
    let mut cursor = 0;
    for node in tree.top_level() {
        let (start, end) = node.body_span;
        out.push_str(&proof_text[cursor..start]);
        out.push_str(SKETCH_PLACEHOLDER);
        cursor = end;
    }
    out.push_str(&proof_text[cursor..]);
    out
}

/// An extracted subproblem: a goal plus the hypotheses available to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subproblem {
    pub goal: String,
    /// Original statement premises followed by the subgoals of all earlier
    /// top-level nodes, each rendered `name : goal`.
    pub hypotheses: Vec<String>,
    pub origin_index: usize,
    pub origin_name: String,
}

/// One subproblem per top-level node, hypotheses accumulating in source order.
pub fn extract_subproblems(tree: &SketchTree, statement: &FormalStatement) -> Vec<Subproblem> {
    let premises = statement.premise_binders();
    let mut subproblems = Vec::new();
    let mut established: Vec<String> = Vec::new();
    for (i, node) in tree.top_level().iter().enumerate() {
        let mut hypotheses = premises.clone();
        hypotheses.extend(established.iter().cloned());
        subproblems.push(Subproblem {
            goal: node.subgoal_text.clone(),
            hypotheses,
            origin_index: i,
            origin_name: node.name.clone(),
        });
        established.push(format!("{} : {}", node.name, node.subgoal_text));
    }
    subproblems
}

/// Render a subproblem as a standalone checkable statement.
pub fn subproblem_statement(sub: &Subproblem, parent: &FormalStatement) -> FormalStatement {
    let binders: String = sub.hypotheses.iter().map(|h| format!(" ({h})")).collect();
    FormalStatement {
        id: format!("{}::{}", parent.id, sub.origin_name),
        informal_id: None,
        formalizer: parent.formalizer,
        theorem_name: sub.origin_name.clone(),
        header: parent.header.clone(),
        body: format!("theorem {}{} : {} :=", sub.origin_name, binders, sub.goal),
        extra: BTreeMap::new(),
    }
}

/// Outcome of solving one subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubproofResult {
    /// First verified pass; `attempts_used` is 1-based.
    Solved {
        proof_text: String,
        body_text: String,
        attempts_used: u32,
    },
    /// All samples verified and none passed.
    Failed { attempts_used: u32 },
    /// The prover backend errored; siblings are unaffected.
    Error { message: String },
}

impl SubproofResult {
    pub fn solved(&self) -> bool {
        matches!(self, SubproofResult::Solved { .. })
    }
}

/// Drop a leading `by` token from a proof, yielding a spliceable tactic body.
pub fn proof_to_body(proof_text: &str) -> String {
    let trimmed = proof_text.trim();
    if let Some(rest) = trimmed.strip_prefix("by") {
        if rest.is_empty() {
            return String::new();
        }
        if rest.starts_with(char::is_whitespace) {
            // single-line `by eval` -> `eval`; multi-line keeps its own layout
            if rest.contains('\n') {
                return rest.strip_prefix('\n').unwrap_or(rest).to_string();
            }
            return rest.trim_start().to_string();
        }
    }
    trimmed.to_string()
}

/// Re-indent a multi-line tactic block so its first line sits at `indent`
/// columns and relative structure is preserved.
pub fn indent_block(body: &str, indent: usize) -> String {
    let lines: Vec<&str> = body.lines().collect();
    if lines.len() <= 1 {
        return body.trim().to_string();
    }
    let common = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let pad = " ".repeat(indent);
    let mut out = String::new();
    out.push_str(lines[0].trim());
    for line in &lines[1..] {
        out.push('\n');
        if line.trim().is_empty() {
            continue;
        }
        let stripped = if line.len() >= common {
            &line[common..]
        } else {
            line.trim_start()
        };
        out.push_str(&pad);
        out.push_str(stripped);
    }
    out
}

/// Solve each subproblem with up to `attempts` prover samples, keeping the
/// first verified pass. Results are keyed by top-level node index.
pub fn solve_subproblems(
    subproblems: &[Subproblem],
    parent: &FormalStatement,
    prover: &dyn ProverBackend,
    checker: &dyn CheckerBackend,
    attempts: u32,
    seed: u64,
) -> BTreeMap<usize, SubproofResult> {
    let mut results = BTreeMap::new();
    for sub in subproblems {
        let statement = subproblem_statement(sub, parent);
        let request = ProveRequest {
            statement_id: statement.id.clone(),
            header: statement.header.clone(),
            body: statement.body.clone(),
            num_samples: attempts,
            seed: derived_seed(seed, &format!("subproblem:{}", statement.id)),
        };
        let proofs = match prover.prove(&request) {
            Ok(resp) => resp.proofs,
            Err(e) => {
                tracing::warn!(subproblem = %statement.id, error = %e, "prover backend failed");
                results.insert(
                    sub.origin_index,
                    SubproofResult::Error {
                        message: e.to_string(),
                    },
                );
                continue;
            }
        };
        let mut outcome = SubproofResult::Failed {
            attempts_used: proofs.len().min(attempts as usize) as u32,
        };
        for (i, proof) in proofs.iter().take(attempts as usize).enumerate() {
            let job = CheckJob {
                job_id: format!("{}#{}", statement.id, i),
                statement: statement.clone(),
                proof_text: proof.clone(),
                timeout: std::time::Duration::from_millis(DEFAULT_TIMEOUT_MS),
            };
            match checker.check(&job) {
                Ok(verdict) if verdict.status == VerdictStatus::Pass => {
                    outcome = SubproofResult::Solved {
                        proof_text: proof.clone(),
                        body_text: proof_to_body(proof),
                        attempts_used: (i + 1) as u32,
                    };
                    break;
                }
                Ok(_) => {}
                Err(e) => {
                    tracing::warn!(subproblem = %statement.id, sample = i, error = %e, "checker error");
                }
            }
        }
        results.insert(sub.origin_index, outcome);
    }
    results
}

/// Splice subproof bodies (keyed by top-level node index) into a sketch.
/// Bodies are inserted verbatim at each placeholder's position.
pub fn assemble(
    sketch_text: &str,
    subproofs: &BTreeMap<usize, String>,
) -> Result<String, SketchError> {
    let tree = parse_have_blocks(sketch_text)?;
    let mut out = String::with_capacity(sketch_text.len());
    let mut cursor = 0;
    for (i, node) in tree.top_level().iter().enumerate() {
        let body = subproofs
            .get(&i)
            .ok_or_else(|| SketchError::MissingSubproof {
                node: node.name.clone(),
            })?;
        let (start, end) = node.body_span;
        out.push_str(&sketch_text[cursor..start]);
        out.push_str(body);
        cursor = end;
    }
    out.push_str(&sketch_text[cursor..]);
    Ok(out)
}

/// An `A = B` goal split into its two sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalEquation {
    pub lhs: String,
    pub rhs: String,
}

impl GoalEquation {
    /// The difference expression handed to a symbolic simplifier.
    pub fn difference_expression(&self) -> String {
        format!("({}) - ({})", self.lhs, self.rhs)
    }
}

/// Extract `(A, B)` when a statement's final goal is a top-level equality.
/// Inequalities, quantified goals with no top-level `=`, and chained
/// equalities yield `None`.
pub fn extract_goal_equation(statement: &FormalStatement) -> Option<GoalEquation> {
    let goal = statement.goal_text()?;
    let mut depth = 0i32;
    let mut eq_positions = Vec::new();
    let bytes = goal.as_bytes();
    for (idx, ch) in goal.char_indices() {
        match ch {
            '(' | '[' | '{' | '⟨' => depth += 1,
            ')' | ']' | '}' | '⟩' => depth -= 1,
            '<' | '>' | '≤' | '≥' | '≠' if depth == 0 => return None,
            '=' if depth == 0 => {
                let prev = if idx == 0 { None } else { Some(bytes[idx - 1]) };
                let next = bytes.get(idx + 1).copied();
                let part_of_other = matches!(
                    prev,
                    Some(b':') | Some(b'=') | Some(b'!') | Some(b'<') | Some(b'>')
                ) || matches!(next, Some(b'=') | Some(b'>'));
                if !part_of_other {
                    eq_positions.push(idx);
                }
            }
            _ => {}
        }
    }
    if eq_positions.len() != 1 {
        return None;
    }
    let pos = eq_positions[0];
    let lhs = goal[..pos].trim();
    let rhs = goal[pos + 1..].trim();
    if lhs.is_empty() || rhs.is_empty() {
        return None;
    }
    Some(GoalEquation {
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    })
}

/// Wire contract for the pluggable symbolic-simplifier backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplifyRequest {
    pub difference_expression_text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplifyResponse {
    pub simplified_text: String,
}

pub trait SimplifierBackend: Send + Sync {
    fn simplify(&self, req: &SimplifyRequest) -> Result<SimplifyResponse, BackendError>;
}

/// Scripted simplifier: maps difference expressions to fixed outputs,
/// echoing the input for anything unscripted.
pub struct ScriptedSimplifier {
    outputs: std::collections::HashMap<String, String>,
}

impl ScriptedSimplifier {
    pub fn new(outputs: impl IntoIterator<Item = (String, String)>) -> Self {
        ScriptedSimplifier {
            outputs: outputs.into_iter().collect(),
        }
    }
}

impl SimplifierBackend for ScriptedSimplifier {
    fn simplify(&self, req: &SimplifyRequest) -> Result<SimplifyResponse, BackendError> {
        let simplified = self
            .outputs
            .get(&req.difference_expression_text)
            .cloned()
            .unwrap_or_else(|| req.difference_expression_text.clone());
        Ok(SimplifyResponse {
            simplified_text: simplified,
        })
    }
}

/// HTTP simplifier adapter.
pub struct HttpSimplifier {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpSimplifier {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpSimplifier {
            endpoint: endpoint.into(),
            agent: crate::http::agent(),
        }
    }
}

impl SimplifierBackend for HttpSimplifier {
    fn simplify(&self, req: &SimplifyRequest) -> Result<SimplifyResponse, BackendError> {
        crate::http::post_json(&self.agent, &self.endpoint, req)
    }
}

/// Per-statement outcome of the simplification hook.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplifyOutcome {
    pub statement_id: String,
    pub equation: Option<GoalEquation>,
    pub simplified: Option<String>,
    /// True when the difference simplifies to `0`, i.e. the goal reduces to
    /// `0 = 0` and the statement is trivially closable.
    pub closable: bool,
}

/// Run goal extraction plus external simplification over statements.
pub fn simplify_statements(
    statements: &[FormalStatement],
    simplifier: &dyn SimplifierBackend,
) -> Vec<SimplifyOutcome> {
    statements
        .iter()
        .map(|stmt| {
            let equation = extract_goal_equation(stmt);
            let (simplified, closable) = match &equation {
                None => (None, false),
                Some(eq) => {
                    let req = SimplifyRequest {
                        difference_expression_text: eq.difference_expression(),
                    };
                    match simplifier.simplify(&req) {
                        Ok(resp) => {
                            let closable = resp.simplified_text.trim() == "0";
                            (Some(resp.simplified_text), closable)
                        }
                        Err(e) => {
                            tracing::warn!(statement = %stmt.id, error = %e, "simplifier failed");
                            (None, false)
                        }
                    }
                }
            };
            SimplifyOutcome {
                statement_id: stmt.id.clone(),
                equation,
                simplified,
                closable,
            }
        })
        .collect()
}

/// Final status of a sketch pipeline run for one statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchStatus {
    Solved,
    SubgoalFailed,
    AssembledProofFailed,
    ParseError,
}

/// Node-level accounting for the run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeReport {
    pub name: String,
    pub subgoal: String,
    pub solved: bool,
    pub attempts_used: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Output record for one statement run through the sketch pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SketchRunReport {
    pub statement_id: String,
    pub status: SketchStatus,
    pub nodes: Vec<NodeReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembled_proof: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Full pipeline: parse, strip, extract, solve, assemble, and verify the
/// assembled proof. One unsolved subproblem fails the whole statement.
pub fn run_sketch_pipeline(
    statement: &FormalStatement,
    proof_text: &str,
    prover: &dyn ProverBackend,
    checker: &dyn CheckerBackend,
    attempts: u32,
    seed: u64,
) -> SketchRunReport {
    let tree = match parse_have_blocks(proof_text) {
        Ok(t) => t,
        Err(e) => {
            return SketchRunReport {
                statement_id: statement.id.clone(),
                status: SketchStatus::ParseError,
                nodes: Vec::new(),
                assembled_proof: None,
                detail: Some(e.to_string()),
            };
        }
    };
    let sketch = strip_subproofs(&tree, proof_text);
    let subproblems = extract_subproblems(&tree, statement);
    let results = solve_subproblems(&subproblems, statement, prover, checker, attempts, seed);

    let nodes: Vec<NodeReport> = subproblems
        .iter()
        .map(|sub| {
            let result = &results[&sub.origin_index];
            NodeReport {
                name: sub.origin_name.clone(),
                subgoal: sub.goal.clone(),
                solved: result.solved(),
                attempts_used: match result {
                    SubproofResult::Solved { attempts_used, .. } => Some(*attempts_used),
                    SubproofResult::Failed { attempts_used } => Some(*attempts_used),
                    SubproofResult::Error { .. } => None,
                },
                error: match result {
                    SubproofResult::Error { message } => Some(message.clone()),
                    _ => None,
                },
            }
        })
        .collect();

    if !results.values().all(|r| r.solved()) {
        return SketchRunReport {
            statement_id: statement.id.clone(),
            status: SketchStatus::SubgoalFailed,
            nodes,
            assembled_proof: None,
            detail: None,
        };
    }

    // splice solved bodies at each placeholder's indentation
    let sketch_tree = match parse_have_blocks(&sketch) {
        Ok(t) => t,
        Err(e) => {
            return SketchRunReport {
                statement_id: statement.id.clone(),
                status: SketchStatus::ParseError,
                nodes,
                assembled_proof: None,
                detail: Some(e.to_string()),
            };
        }
    };
    let mut bodies = BTreeMap::new();
    for (i, node) in sketch_tree.top_level().iter().enumerate() {
        let indent = crate::text::offset_to_line_col(&sketch, node.body_span.0).1 as usize - 1;
        if let Some(SubproofResult::Solved { body_text, .. }) = results.get(&i) {
            bodies.insert(i, indent_block(body_text, indent));
        }
    }
    let assembled = match assemble(&sketch, &bodies) {
        Ok(text) => text,
        Err(e) => {
            return SketchRunReport {
                statement_id: statement.id.clone(),
                status: SketchStatus::SubgoalFailed,
                nodes,
                assembled_proof: None,
                detail: Some(e.to_string()),
            };
        }
    };

    let job = CheckJob {
        job_id: format!("{}#assembled", statement.id),
        statement: statement.clone(),
        proof_text: assembled.clone(),
        timeout: std::time::Duration::from_millis(DEFAULT_TIMEOUT_MS),
    };
    let status = match checker.check(&job) {
        Ok(v) if v.status == VerdictStatus::Pass => SketchStatus::Solved,
        Ok(_) => SketchStatus::AssembledProofFailed,
        Err(e) => {
            return SketchRunReport {
                statement_id: statement.id.clone(),
                status: SketchStatus::AssembledProofFailed,
                nodes,
                assembled_proof: Some(assembled),
                detail: Some(e.to_string()),
            };
        }
    };
    SketchRunReport {
        statement_id: statement.id.clone(),
        status,
        nodes,
        assembled_proof: Some(assembled),
        detail: None,
    }
}
