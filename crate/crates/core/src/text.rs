//! Source-text utilities shared by statement normalization and proof-style
//! statistics: comment stripping, whitespace collapsing, and tactic-token
//! counting, all aware of string literals and nested block comments.

/// Normalize `\r\n` and bare `\r` line endings to `\n`.
pub fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n")
}

#[derive(Clone, Copy, PartialEq)]
enum LexState {
    Code,
    Str { escaped: bool },
    LineComment,
    BlockComment { depth: u32 },
}

/// Walk `s`, classifying each char as code, string content, or comment.
/// The callback receives `(ch, state_of_ch)` where the state is the one the
/// character belongs to (so the opening `--` of a line comment is already
/// classified as comment).
fn lex_chars(s: &str, mut f: impl FnMut(char, LexState)) {
    let mut state = LexState::Code;
    let mut chars = s.chars().peekable();
    while let Some(ch) = chars.next() {
        match state {
            LexState::Code => match ch {
                '"' => {
                    state = LexState::Str { escaped: false };
                    f(ch, state);
                }
                '-' if chars.peek() == Some(&'-') => {
                    state = LexState::LineComment;
                    f(ch, state);
                }
                '/' if chars.peek() == Some(&'-') => {
                    state = LexState::BlockComment { depth: 1 };
                    f(ch, state);
                    let dash = chars.next().unwrap();
                    f(dash, state);
                }
                _ => f(ch, LexState::Code),
            },
            LexState::Str { escaped } => {
                f(ch, state);
                if escaped {
                    state = LexState::Str { escaped: false };
                } else if ch == '\\' {
                    state = LexState::Str { escaped: true };
                } else if ch == '"' {
                    state = LexState::Code;
                }
            }
            LexState::LineComment => {
                if ch == '\n' {
                    state = LexState::Code;
                    f(ch, LexState::Code);
                } else {
                    f(ch, state);
                }
            }
            LexState::BlockComment { depth } => {
                if ch == '-' && chars.peek() == Some(&'/') {
                    f(ch, state);
                    let slash = chars.next().unwrap();
                    if depth == 1 {
                        state = LexState::Code;
                        // closing delimiter still counts as comment text
                        f(slash, LexState::BlockComment { depth });
                    } else {
                        state = LexState::BlockComment { depth: depth - 1 };
                        f(slash, state);
                    }
                } else if ch == '/' && chars.peek() == Some(&'-') {
                    state = LexState::BlockComment { depth: depth + 1 };
                    f(ch, state);
                    let dash = chars.next().unwrap();
                    f(dash, state);
                } else {
                    f(ch, state);
                }
            }
        }
    }
}

/// Remove line (`--`) and nested block (`/- -/`) comments. String literal
/// contents are preserved verbatim, comment markers inside strings included.
pub fn strip_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    lex_chars(s, |ch, state| match state {
        LexState::Code | LexState::Str { .. } => out.push(ch),
        // keep line structure so a comment never glues two lines together
        LexState::LineComment | LexState::BlockComment { .. } => {
            if ch == '\n' {
                out.push('\n');
            }
        }
    });
    out
}

/// Collapse every run of whitespace to a single space and trim the ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(ch);
        }
    }
    out
}

/// Count whitespace-delimited tokens exactly equal to `try`, ignoring
/// occurrences inside comments and string literals.
///
/// Comments act as token delimiters (removing one never glues two tokens
/// together); a string literal adjacent to other characters poisons the
/// surrounding token, so `try"x"` is not counted while `"x" try "y"` is.
pub fn count_try_tokens(s: &str) -> usize {
    let mut count = 0;
    let mut token = String::new();
    let mut poisoned = false;
    let mut flush = |token: &mut String, poisoned: &mut bool| {
        if !*poisoned && token == "try" {
            count += 1;
        }
        token.clear();
        *poisoned = false;
    };
    let mut events: Vec<(char, bool)> = Vec::new(); // (ch, is_code)
    lex_chars(s, |ch, state| {
        events.push((ch, matches!(state, LexState::Code)));
    });
    for (ch, is_code) in events {
        if is_code {
            if ch.is_whitespace() {
                flush(&mut token, &mut poisoned);
            } else {
                token.push(ch);
            }
        } else if ch == '\n' || ch.is_whitespace() {
            // comment interiors containing newlines still delimit lines
            flush(&mut token, &mut poisoned);
        } else {
            // string/comment content glued onto a token: not a bare `try`
            poisoned = true;
        }
    }
    flush(&mut token, &mut poisoned);
    count
}

/// Map a byte offset to a 1-based (line, column) pair.
pub fn offset_to_line_col(s: &str, offset: usize) -> (u32, u32) {
    let clamped = offset.min(s.len());
    let mut line = 1u32;
    let mut col = 1u32;
    for (idx, ch) in s.char_indices() {
        if idx >= clamped {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}
