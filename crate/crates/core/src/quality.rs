//! Formalization quality gates: judge-scored faithfulness/completeness (FC)
//! aggregation, threshold filtering, per-formalizer candidate selection, and
//! the acceptance-statistics report.

use std::collections::HashMap;

use indexmap::IndexMap;
use num::rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::corpus::{FormalStatement, Formalizer, InformalStatement};
use crate::seeded::{derived_rng, derived_seed};

/// Assessment prompt template shipped with the crate; `{informal_text}` and
/// `{formal_text}` are substituted per call.
pub const FC_PROMPT_TEMPLATE: &str = include_str!("../assets/fc_prompt.txt");

/// Identifier sent on the wire so a judge service can select the template.
pub const FC_PROMPT_TEMPLATE_ID: &str = "fc-assessment-v1";

/// Judgments per candidate unless configured otherwise.
pub const DEFAULT_JUDGMENTS: u32 = 4;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("n_judgments must be at least 1")]
    ZeroJudgments,
    #[error("candidate `{0}` is missing its CC or FC result")]
    Unpopulated(String),
    #[error("invalid threshold `{0}`: expected a value in [0, 1] like `0.5` or `1/2`")]
    BadThreshold(String),
}

/// Aggregated judge score for one candidate: the fraction of judgments that
/// called the formalization appropriate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FCScore {
    pub num_appropriate: u32,
    pub num_judgments: u32,
}

impl FCScore {
    pub fn new(num_appropriate: u32, num_judgments: u32) -> Self {
        assert!(num_judgments > 0, "num_judgments must be positive");
        assert!(num_appropriate <= num_judgments);
        FCScore {
            num_appropriate,
            num_judgments,
        }
    }

    /// The score as an exact rational in [0, 1].
    pub fn score(&self) -> Ratio<u32> {
        Ratio::new(self.num_appropriate, self.num_judgments)
    }

    pub fn value(&self) -> f64 {
        self.num_appropriate as f64 / self.num_judgments as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeLabel {
    Appropriate,
    Inappropriate,
}

/// One parsed judge response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub label: JudgeLabel,
    pub raw_response: String,
}

/// Parse a raw judge response: the final non-empty line, trimmed, must equal
/// `Appropriate` or `Inappropriate` case-insensitively. Anything else parses
/// as inappropriate with the `flagged` bit set.
pub fn parse_judge_response(raw: &str) -> (JudgeVerdict, bool) {
    let last = raw
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim();
    let label = if last.eq_ignore_ascii_case("appropriate") {
        Some(JudgeLabel::Appropriate)
    } else if last.eq_ignore_ascii_case("inappropriate") {
        Some(JudgeLabel::Inappropriate)
    } else {
        None
    };
    match label {
        Some(label) => (
            JudgeVerdict {
                label,
                raw_response: raw.to_string(),
            },
            false,
        ),
        None => (
            JudgeVerdict {
                label: JudgeLabel::Inappropriate,
                raw_response: raw.to_string(),
            },
            true,
        ),
    }
}

/// Wire request for one judgment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub informal_text: String,
    pub formal_text: String,
    pub prompt_template_id: String,
    /// Per-call sub-seed; decoding is left to the backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl JudgeRequest {
    /// Render the full prompt for backends that take raw text.
    pub fn render_prompt(&self) -> String {
        FC_PROMPT_TEMPLATE
            .replace("{informal_text}", &self.informal_text)
            .replace("{formal_text}", &self.formal_text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub raw_response: String,
}

pub trait JudgeBackend: Send + Sync {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse, BackendError>;
}

/// Test double that replays a fixed sequence of raw responses.
pub struct SequenceJudge {
    responses: std::sync::Mutex<std::collections::VecDeque<String>>,
}

impl SequenceJudge {
    pub fn new(responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        SequenceJudge {
            responses: std::sync::Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }
}

impl JudgeBackend for SequenceJudge {
    fn judge(&self, _request: &JudgeRequest) -> Result<JudgeResponse, BackendError> {
        let mut q = self.responses.lock().expect("judge script lock");
        match q.pop_front() {
            Some(raw) => Ok(JudgeResponse { raw_response: raw }),
            None => Err(BackendError::Protocol("judge script exhausted".into())),
        }
    }
}

/// Scripted judge keyed by formal statement text, with a default response.
pub struct ScriptedJudge {
    by_formal_text: std::sync::Mutex<HashMap<String, std::collections::VecDeque<String>>>,
    default: String,
}

impl ScriptedJudge {
    pub fn new(scripts: impl IntoIterator<Item = (String, Vec<String>)>, default: &str) -> Self {
        ScriptedJudge {
            by_formal_text: std::sync::Mutex::new(
                scripts.into_iter().map(|(k, v)| (k, v.into())).collect(),
            ),
            default: default.to_string(),
        }
    }

    /// A judge that always answers with the same response.
    pub fn constant(response: &str) -> Self {
        ScriptedJudge::new([], response)
    }
}

impl JudgeBackend for ScriptedJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse, BackendError> {
        let mut map = self.by_formal_text.lock().expect("judge script lock");
        let raw = map
            .get_mut(&request.formal_text)
            .and_then(|q| q.pop_front())
            .unwrap_or_else(|| self.default.clone());
        Ok(JudgeResponse { raw_response: raw })
    }
}

/// HTTP judge adapter.
pub struct HttpJudge {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpJudge {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpJudge {
            endpoint: endpoint.into(),
            agent: crate::http::agent(),
        }
    }
}

impl JudgeBackend for HttpJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse, BackendError> {
        crate::http::post_json(&self.agent, &self.endpoint, request)
    }
}

/// A judgment that was counted inappropriate for operational reasons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeCallFailure {
    pub judgment_index: u32,
    pub reason: String,
}

/// Issue `n_judgments` independent judge calls and aggregate the score.
///
/// A failed call, or a response without a parseable final-line token, counts
/// as inappropriate and is flagged in the returned per-call failure log —
/// the gate errs toward rejecting statements, never admitting bad ones.
pub fn fc_judge(
    informal: &InformalStatement,
    formal: &FormalStatement,
    judge: &dyn JudgeBackend,
    n_judgments: u32,
    seed: u64,
) -> Result<(FCScore, Vec<JudgeCallFailure>), QualityError> {
    if n_judgments == 0 {
        return Err(QualityError::ZeroJudgments);
    }
    let mut num_appropriate = 0;
    let mut failures = Vec::new();
    for i in 0..n_judgments {
        let request = JudgeRequest {
            informal_text: informal.text.clone(),
            formal_text: formal.body.clone(),
            prompt_template_id: FC_PROMPT_TEMPLATE_ID.to_string(),
            seed: Some(derived_seed(seed, &format!("judge:{}:{}", formal.id, i))),
        };
        match judge.judge(&request) {
            Ok(response) => {
                let (verdict, flagged) = parse_judge_response(&response.raw_response);
                if flagged {
                    tracing::warn!(candidate = %formal.id, judgment = i, "unparseable judge response");
                    failures.push(JudgeCallFailure {
                        judgment_index: i,
                        reason: format!(
                            "unparseable response: {:?}",
                            truncate(&response.raw_response, 80)
                        ),
                    });
                } else if verdict.label == JudgeLabel::Appropriate {
                    num_appropriate += 1;
                }
            }
            Err(e) => {
                tracing::warn!(candidate = %formal.id, judgment = i, error = %e, "judge call failed");
                failures.push(JudgeCallFailure {
                    judgment_index: i,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((FCScore::new(num_appropriate, n_judgments), failures))
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

/// Parse a threshold given as a decimal (`0.5`) or a fraction (`1/2`).
pub fn parse_threshold(s: &str) -> Result<Ratio<u32>, QualityError> {
    let bad = || QualityError::BadThreshold(s.to_string());
    let ratio = if let Some((num, den)) = s.split_once('/') {
        let num: u32 = num.trim().parse().map_err(|_| bad())?;
        let den: u32 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        Ratio::new(num, den)
    } else if let Some((whole, frac)) = s.split_once('.') {
        let whole: u32 = if whole.is_empty() {
            0
        } else {
            whole.trim().parse().map_err(|_| bad())?
        };
        if frac.len() > 9 || frac.chars().any(|c| !c.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = 10u32.pow(frac.len() as u32);
        let frac_val: u32 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        Ratio::new(whole * scale + frac_val, scale)
    } else {
        let whole: u32 = s.trim().parse().map_err(|_| bad())?;
        Ratio::from_integer(whole)
    };
    if ratio > Ratio::from_integer(1) {
        return Err(bad());
    }
    Ok(ratio)
}

/// The default filter threshold: scores strictly below 1/2 are removed.
pub fn default_threshold() -> Ratio<u32> {
    Ratio::new(1, 2)
}

/// Keep exactly the statements whose score is at or above the threshold.
/// A score exactly at the threshold is kept.
pub fn fc_filter<T>(scored: Vec<(T, FCScore)>, threshold: Ratio<u32>) -> Vec<T> {
    scored
        .into_iter()
        .filter(|(_, score)| score.score() >= threshold)
        .map(|(item, _)| item)
        .collect()
}

/// One candidate formalization with its gate results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub statement: FormalStatement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cc_pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fc: Option<FCScore>,
}

impl Candidate {
    pub fn new(statement: FormalStatement) -> Self {
        Candidate {
            statement,
            cc_pass: None,
            fc: None,
        }
    }

    fn valid(&self, threshold: Ratio<u32>) -> Result<bool, QualityError> {
        let cc = self
            .cc_pass
            .ok_or_else(|| QualityError::Unpopulated(self.statement.id.clone()))?;
        let fc = self
            .fc
            .ok_or_else(|| QualityError::Unpopulated(self.statement.id.clone()))?;
        Ok(cc && fc.score() >= threshold)
    }
}

/// All candidates generated for one informal problem, in generation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBundle {
    pub informal_id: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateBundle {
    /// Candidates grouped by formalizer tag, groups in first-appearance
    /// order, candidates in generation order within each group.
    pub fn groups(&self) -> IndexMap<Formalizer, Vec<&Candidate>> {
        let mut groups: IndexMap<Formalizer, Vec<&Candidate>> = IndexMap::new();
        for c in &self.candidates {
            groups.entry(c.statement.formalizer).or_default().push(c);
        }
        groups
    }
}

/// For each formalizer with at least one valid candidate (CC pass and FC
/// score at or above the threshold), choose exactly one valid candidate
/// uniformly at random. The draw is keyed by `(seed, informal id, formalizer)`.
pub fn select_candidates(
    bundle: &CandidateBundle,
    threshold: Ratio<u32>,
    seed: u64,
) -> Result<Vec<FormalStatement>, QualityError> {
    let mut selected = Vec::new();
    for (formalizer, group) in bundle.groups() {
        let mut valid = Vec::new();
        for candidate in group {
            if candidate.valid(threshold)? {
                valid.push(candidate);
            }
        }
        if valid.is_empty() {
            continue;
        }
        let label = format!("select:{}:{}", bundle.informal_id, formalizer.as_str());
        let pick = derived_rng(seed, &label).gen_range(0..valid.len());
        selected.push(valid[pick].statement.clone());
    }
    Ok(selected)
}

/// pass@1 / pass@k cell of the acceptance-statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassAtPair {
    pub at_1: f64,
    pub at_k: f64,
}

/// Per-formalizer acceptance statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRow {
    pub bundles: usize,
    pub cc: PassAtPair,
    pub fc: PassAtPair,
    pub cc_fc: PassAtPair,
}

/// Acceptance statistics across a corpus of judged bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    /// The `k` used for the pass@k column (the per-formalizer candidate count).
    pub k: usize,
    pub rows: std::collections::BTreeMap<String, GateRow>,
}

impl GateReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>8} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12}\n",
            "formalizer", "bundles", "cc@1", "cc@k", "fc@1", "fc@k", "cc+fc@1", "cc+fc@k"
        ));
        for (tag, row) in &self.rows {
            out.push_str(&format!(
                "{:<12} {:>8} {:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}% {:>11.2}% {:>11.2}%\n",
                tag,
                row.bundles,
                row.cc.at_1 * 100.0,
                row.cc.at_k * 100.0,
                row.fc.at_1 * 100.0,
                row.fc.at_k * 100.0,
                row.cc_fc.at_1 * 100.0,
                row.cc_fc.at_k * 100.0,
            ));
        }
        out
    }
}

/// Compute CC / FC / CC+FC pass rates at 1 and at `k` per formalizer.
///
/// pass@k is the fraction of informal problems with at least one qualifying
/// candidate among that formalizer's first k candidates, in generation order.
/// The denominator for a formalizer counts the bundles where it produced at
/// least one candidate.
pub fn gate_report(
    bundles: &[CandidateBundle],
    k: usize,
    threshold: Ratio<u32>,
) -> Result<GateReport, QualityError> {
    struct Tally {
        bundles: usize,
        cc1: usize,
        cck: usize,
        fc1: usize,
        fck: usize,
        both1: usize,
        bothk: usize,
    }
    let mut tallies: std::collections::BTreeMap<String, Tally> = std::collections::BTreeMap::new();
    for bundle in bundles {
        for (formalizer, group) in bundle.groups() {
            let mut cc_flags = Vec::with_capacity(group.len());
            let mut fc_flags = Vec::with_capacity(group.len());
            for c in &group {
                let cc = c
                    .cc_pass
                    .ok_or_else(|| QualityError::Unpopulated(c.statement.id.clone()))?;
                let fc =
                    c.fc.ok_or_else(|| QualityError::Unpopulated(c.statement.id.clone()))?;
                cc_flags.push(cc);
                fc_flags.push(fc.score() >= threshold);
            }
            let tally = tallies
                .entry(formalizer.as_str().to_string())
                .or_insert(Tally {
                    bundles: 0,
                    cc1: 0,
                    cck: 0,
                    fc1: 0,
                    fck: 0,
                    both1: 0,
                    bothk: 0,
                });
            tally.bundles += 1;
            let first = |flags: &[bool], n: usize| flags.iter().take(n).any(|&f| f);
            let both: Vec<bool> = cc_flags
                .iter()
                .zip(&fc_flags)
                .map(|(&c, &f)| c && f)
                .collect();
            if first(&cc_flags, 1) {
                tally.cc1 += 1;
            }
            if first(&cc_flags, k) {
                tally.cck += 1;
            }
            if first(&fc_flags, 1) {
                tally.fc1 += 1;
            }
            if first(&fc_flags, k) {
                tally.fck += 1;
            }
            if first(&both, 1) {
                tally.both1 += 1;
            }
            if first(&both, k) {
                tally.bothk += 1;
            }
        }
    }
    let rows = tallies
        .into_iter()
        .map(|(tag, t)| {
            let frac = |n: usize| n as f64 / t.bundles as f64;
            (
                tag,
                GateRow {
                    bundles: t.bundles,
                    cc: PassAtPair {
                        at_1: frac(t.cc1),
                        at_k: frac(t.cck),
                    },
                    fc: PassAtPair {
                        at_1: frac(t.fc1),
                        at_k: frac(t.fck),
                    },
                    cc_fc: PassAtPair {
                        at_1: frac(t.both1),
                        at_k: frac(t.bothk),
                    },
                },
            )
        })
        .collect();
    Ok(GateReport { k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn informal(id: &str) -> InformalStatement {
        InformalStatement {
            id: id.to_string(),
            source: crate::corpus::SourceTag::Numina,
            text: format!("problem {id}"),
            extra: BTreeMap::new(),
        }
    }

    fn formal(id: &str, formalizer: Formalizer) -> FormalStatement {
        FormalStatement {
            id: id.to_string(),
            informal_id: Some("p".to_string()),
            formalizer,
            theorem_name: format!("t_{id}"),
            header: String::new(),
            body: format!("theorem t_{id} : 1 = 1 :="),
            extra: BTreeMap::new(),
        }
    }

    fn candidate(id: &str, formalizer: Formalizer, cc: bool, appropriate: u32) -> Candidate {
        Candidate {
            statement: formal(id, formalizer),
            cc_pass: Some(cc),
            fc: Some(FCScore::new(appropriate, 4)),
        }
    }

    #[test]
    fn sequence_judge_scores_three_of_four() {
        let judge = SequenceJudge::new([
            "Looks faithful.\nAppropriate",
            "Misses a hypothesis.\nInappropriate",
            "Appropriate",
            "appropriate",
        ]);
        let (score, failures) =
            fc_judge(&informal("p"), &formal("f", Formalizer::A), &judge, 4, 7).unwrap();
        assert_eq!(score.num_appropriate, 3);
        assert_eq!(score.num_judgments, 4);
        assert_eq!(score.value(), 0.75);
        assert!(failures.is_empty());
    }

    #[test]
    fn zero_appropriate_gives_zero_score() {
        let judge = ScriptedJudge::constant("Inappropriate");
        let (score, _) =
            fc_judge(&informal("p"), &formal("f", Formalizer::A), &judge, 4, 7).unwrap();
        assert_eq!(score.num_appropriate, 0);
        assert_eq!(score.value(), 0.0);
    }

    #[test]
    fn judge_failures_count_inappropriate_and_are_flagged() {
        let judge = SequenceJudge::new(["Appropriate", "Appropriate"]);
        // third and fourth calls exhaust the script and error
        let (score, failures) =
            fc_judge(&informal("p"), &formal("f", Formalizer::A), &judge, 4, 7).unwrap();
        assert_eq!(score.num_appropriate, 2);
        assert_eq!(failures.len(), 2);
    }

    #[test]
    fn unparseable_response_is_flagged_inappropriate() {
        let judge = ScriptedJudge::constant("I think it is probably fine?");
        let (score, failures) =
            fc_judge(&informal("p"), &formal("f", Formalizer::A), &judge, 4, 7).unwrap();
        assert_eq!(score.num_appropriate, 0);
        assert_eq!(failures.len(), 4);
    }

    #[test]
    fn final_line_token_parsing() {
        assert_eq!(
            parse_judge_response("blah\nAppropriate\n\n").0.label,
            JudgeLabel::Appropriate
        );
        assert_eq!(
            parse_judge_response("INAPPROPRIATE").0.label,
            JudgeLabel::Inappropriate
        );
        assert!(!parse_judge_response("INAPPROPRIATE").1);
        assert!(parse_judge_response("Appropriate, mostly").1);
        assert!(parse_judge_response("").1);
    }

    #[test]
    fn score_invariant_under_judgment_order() {
        let perms: [[&str; 4]; 3] = [
            ["Appropriate", "Inappropriate", "Appropriate", "Appropriate"],
            ["Appropriate", "Appropriate", "Appropriate", "Inappropriate"],
            ["Inappropriate", "Appropriate", "Appropriate", "Appropriate"],
        ];
        let scores: Vec<u32> = perms
            .iter()
            .map(|perm| {
                let judge = SequenceJudge::new(perm.iter().copied());
                fc_judge(&informal("p"), &formal("f", Formalizer::A), &judge, 4, 7)
                    .unwrap()
                    .0
                    .num_appropriate
            })
            .collect();
        assert!(scores.iter().all(|&s| s == 3));
    }

    #[test]
    fn filter_keeps_boundary_and_drops_below() {
        let scored = vec![
            ("exactly-half", FCScore::new(2, 4)),
            ("below", FCScore::new(1, 4)),
            ("above", FCScore::new(3, 4)),
        ];
        let kept = fc_filter(scored, default_threshold());
        assert_eq!(kept, vec!["exactly-half", "above"]);
    }

    #[test]
    fn filter_empty_input() {
        let kept: Vec<&str> = fc_filter(Vec::new(), default_threshold());
        assert!(kept.is_empty());
    }

    #[test]
    fn filter_is_idempotent() {
        let scored: Vec<(u32, FCScore)> = (0..=4).map(|i| (i, FCScore::new(i, 4))).collect();
        let once = fc_filter(scored.clone(), default_threshold());
        let rescored: Vec<(u32, FCScore)> = once.iter().map(|&i| (i, FCScore::new(i, 4))).collect();
        let twice = fc_filter(rescored, default_threshold());
        assert_eq!(once, twice);
    }

    #[test]
    fn threshold_parsing() {
        assert_eq!(parse_threshold("0.5").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_threshold("1/2").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_threshold("0.25").unwrap(), Ratio::new(1, 4));
        assert_eq!(parse_threshold("1").unwrap(), Ratio::from_integer(1));
        assert!(parse_threshold("1.5").is_err());
        assert!(parse_threshold("x").is_err());
    }

    fn bundle_5_of_8_and_3_of_8() -> CandidateBundle {
        let mut candidates = Vec::new();
        for i in 0..8 {
            // A: first 5 valid
            candidates.push(candidate(
                &format!("a{i}"),
                Formalizer::A,
                i < 5,
                if i < 5 { 4 } else { 0 },
            ));
        }
        for i in 0..8 {
            // B: first 3 valid
            candidates.push(candidate(
                &format!("b{i}"),
                Formalizer::B,
                i < 3,
                if i < 3 { 4 } else { 0 },
            ));
        }
        CandidateBundle {
            informal_id: "p".to_string(),
            candidates,
        }
    }

    #[test]
    fn selects_one_per_formalizer() {
        let bundle = bundle_5_of_8_and_3_of_8();
        let selected = select_candidates(&bundle, default_threshold(), 11).unwrap();
        assert_eq!(selected.len(), 2);
        assert_eq!(selected[0].formalizer, Formalizer::A);
        assert_eq!(selected[1].formalizer, Formalizer::B);
        // every selected statement is valid under the CC/FC predicate
        assert!(selected[0].id.starts_with('a'));
        let a_index: usize = selected[0].id[1..].parse().unwrap();
        assert!(a_index < 5);
    }

    #[test]
    fn zero_valid_formalizer_contributes_nothing() {
        let mut candidates = Vec::new();
        for i in 0..8 {
            candidates.push(candidate(&format!("a{i}"), Formalizer::A, false, 0));
        }
        candidates.push(candidate("b0", Formalizer::B, true, 4));
        let bundle = CandidateBundle {
            informal_id: "p".to_string(),
            candidates,
        };
        let selected = select_candidates(&bundle, default_threshold(), 5).unwrap();
        assert_eq!(selected.len(), 1);
        assert_eq!(selected[0].id, "b0");
    }

    #[test]
    fn selection_matches_seeded_replay() {
        let mut candidates = Vec::new();
        for i in 0..4 {
            candidates.push(candidate(&format!("a{i}"), Formalizer::A, true, 4));
        }
        let bundle = CandidateBundle {
            informal_id: "px".to_string(),
            candidates,
        };
        let selected = select_candidates(&bundle, default_threshold(), 123).unwrap();
        let expected = derived_rng(123, "select:px:a").gen_range(0..4usize);
        assert_eq!(selected[0].id, format!("a{expected}"));
    }

    #[test]
    fn unpopulated_candidate_is_an_error() {
        let bundle = CandidateBundle {
            informal_id: "p".to_string(),
            candidates: vec![Candidate::new(formal("a0", Formalizer::A))],
        };
        assert!(matches!(
            select_candidates(&bundle, default_threshold(), 0),
            Err(QualityError::Unpopulated(_))
        ));
    }

    #[test]
    fn gate_report_saturated_formalizer() {
        let candidates = (0..8)
            .map(|i| candidate(&format!("a{i}"), Formalizer::A, true, 4))
            .collect();
        let bundle = CandidateBundle {
            informal_id: "p".to_string(),
            candidates,
        };
        let report = gate_report(&[bundle], 8, default_threshold()).unwrap();
        let row = &report.rows["a"];
        assert_eq!(row.cc.at_1, 1.0);
        assert_eq!(row.cc.at_k, 1.0);
        assert_eq!(row.cc_fc.at_1, 1.0);
        assert_eq!(row.cc_fc.at_k, 1.0);
    }

    #[test]
    fn gate_report_only_fifth_candidate_passes() {
        let candidates = (0..8)
            .map(|i| candidate(&format!("a{i}"), Formalizer::A, i == 4, 4))
            .collect();
        let bundle = CandidateBundle {
            informal_id: "p".to_string(),
            candidates,
        };
        let report = gate_report(&[bundle], 8, default_threshold()).unwrap();
        let row = &report.rows["a"];
        assert_eq!(row.cc.at_1, 0.0);
        assert_eq!(row.cc.at_k, 1.0);
    }

    #[test]
    fn gate_report_matches_brute_force_recount() {
        // 50 scripted bundles with varying validity patterns
        let mut bundles = Vec::new();
        for b in 0..50u32 {
            let mut candidates = Vec::new();
            for i in 0..8u32 {
                let cc = (b + i) % 3 != 0;
                let appropriate = ((b * 7 + i * 5) % 5).min(4);
                candidates.push(candidate(
                    &format!("p{b}-a{i}"),
                    Formalizer::A,
                    cc,
                    appropriate,
                ));
            }
            bundles.push(CandidateBundle {
                informal_id: format!("p{b}"),
                candidates,
            });
        }
        let report = gate_report(&bundles, 8, default_threshold()).unwrap();
        let row = &report.rows["a"];

        // independent recount, long form
        let mut cc1 = 0usize;
        let mut cck = 0usize;
        let mut fc1 = 0usize;
        let mut fck = 0usize;
        let mut both1 = 0usize;
        let mut bothk = 0usize;
        for b in 0..50u32 {
            let cc: Vec<bool> = (0..8u32).map(|i| (b + i) % 3 != 0).collect();
            let fc: Vec<bool> = (0..8u32)
                .map(|i| ((b * 7 + i * 5) % 5).min(4) >= 2)
                .collect();
            if cc[0] {
                cc1 += 1;
            }
            if cc.iter().any(|&x| x) {
                cck += 1;
            }
            if fc[0] {
                fc1 += 1;
            }
            if fc.iter().any(|&x| x) {
                fck += 1;
            }
            if cc[0] && fc[0] {
                both1 += 1;
            }
            if cc.iter().zip(&fc).any(|(&c, &f)| c && f) {
                bothk += 1;
            }
        }
        assert_eq!(row.cc.at_1, cc1 as f64 / 50.0);
        assert_eq!(row.cc.at_k, cck as f64 / 50.0);
        assert_eq!(row.fc.at_1, fc1 as f64 / 50.0);
        assert_eq!(row.fc.at_k, fck as f64 / 50.0);
        assert_eq!(row.cc_fc.at_1, both1 as f64 / 50.0);
        assert_eq!(row.cc_fc.at_k, bothk as f64 / 50.0);
        // monotone in k
        assert!(row.cc.at_k >= row.cc.at_1);
        assert!(row.fc.at_k >= row.fc.at_1);
        assert!(row.cc_fc.at_k >= row.cc_fc.at_1);
    }

    #[test]
    fn http_judge_round_trips() {
        let server =
            crate::http::testserver::TestServer::serve(r#"{"raw_response":"Appropriate"}"#, 1);
        let judge = HttpJudge::new(server.url.clone());
        let request = JudgeRequest {
            informal_text: "p".into(),
            formal_text: "f".into(),
            prompt_template_id: FC_PROMPT_TEMPLATE_ID.into(),
            seed: Some(1),
        };
        let response = judge.judge(&request).unwrap();
        assert_eq!(
            parse_judge_response(&response.raw_response).0.label,
            JudgeLabel::Appropriate
        );
        let seen = server.requests.recv().unwrap();
        assert!(seen.contains("prompt_template_id"));
    }

    #[test]
    fn prompt_template_renders_both_texts() {
        let request = JudgeRequest {
            informal_text: "What is 2+2?".into(),
            formal_text: "theorem t : 2 + 2 = 4 :=".into(),
            prompt_template_id: FC_PROMPT_TEMPLATE_ID.into(),
            seed: None,
        };
        let prompt = request.render_prompt();
        assert!(prompt.contains("What is 2+2?"));
        assert!(prompt.contains("theorem t : 2 + 2 = 4 :="));
        assert!(prompt
            .to_lowercase()
            .contains("appropriate or inappropriate"));
    }
}
