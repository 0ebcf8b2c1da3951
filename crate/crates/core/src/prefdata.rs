//! Preference-learning data construction: pass-ratio bucketing over attempt
//! sets, chosen/rejected pair sampling (with a length-penalized variant), and
//! per-sample reward assignment with a configurable timeout reward.
//!
//! Ratios and bucket boundaries use exact rational arithmetic; floating point
//! would misclassify boundary cases like 4/16 against an upper bound of 1/4.

use num::rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProofAttempt;
use crate::evaluate::AttemptSet;
use crate::seeded::derived_rng;
use crate::verify::{Verdict, VerdictStatus};

pub type Ratio64 = Ratio<u64>;

pub const DEFAULT_PASS_REWARD: i32 = 8;
pub const DEFAULT_FAIL_REWARD: i32 = -8;
pub const DEFAULT_TIMEOUT_REWARD: i32 = -8;

#[derive(Debug, Error)]
pub enum PrefDataError {
    #[error("attempt set `{0}` has no samples")]
    EmptySet(String),
    #[error("invalid bucket: need 0 <= lower < upper <= 1, got ({lower}, {upper}]")]
    BadBucket { lower: Ratio64, upper: Ratio64 },
    #[error("invalid bucket spec `{0}`: expected `lower,upper` with decimals or fractions")]
    BadBucketSpec(String),
    #[error("timeout reward must be one of 0, -8, -16, got {0}")]
    BadTimeoutReward(i32),
    #[error("pass reward must exceed fail reward")]
    RewardOrder,
    #[error("group summary needs at least 2 samples, got {0}")]
    GroupTooSmall(usize),
}

/// Half-open-below ratio interval `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRatioBucket {
    pub lower: Ratio64,
    pub upper: Ratio64,
}

impl PassRatioBucket {
    pub fn new(lower: Ratio64, upper: Ratio64) -> Result<Self, PrefDataError> {
        let one = Ratio64::from_integer(1);
        let zero = Ratio64::from_integer(0);
        if lower < zero || lower >= upper || upper > one {
            return Err(PrefDataError::BadBucket { lower, upper });
        }
        Ok(PassRatioBucket { lower, upper })
    }

    /// Parse `"0,0.25"` or `"0,1/4"`.
    pub fn parse(spec: &str) -> Result<Self, PrefDataError> {
        let (lo, hi) = spec
            .split_once(',')
            .ok_or_else(|| PrefDataError::BadBucketSpec(spec.to_string()))?;
        let parse_side = |s: &str| -> Result<Ratio64, PrefDataError> {
            let r = crate::quality::parse_threshold(s.trim())
                .map_err(|_| PrefDataError::BadBucketSpec(spec.to_string()))?;
            Ok(Ratio64::new(*r.numer() as u64, *r.denom() as u64))
        };
        PassRatioBucket::new(parse_side(lo)?, parse_side(hi)?)
    }

    /// Exclusive lower bound, inclusive upper bound.
    pub fn contains(&self, ratio: Ratio64) -> bool {
        self.lower < ratio && ratio <= self.upper
    }
}

/// The exact pass ratio `c / n` of an attempt set.
pub fn pass_ratio(attempts: &AttemptSet) -> Result<Ratio64, PrefDataError> {
    if attempts.n() == 0 {
        return Err(PrefDataError::EmptySet(attempts.statement_id.clone()));
    }
    Ok(Ratio64::new(attempts.c() as u64, attempts.n() as u64))
}

/// Keep exactly the sets whose ratio lands in the bucket. Sets with zero
/// samples have no ratio and are never selected.
pub fn bucket_statements<'a>(
    sets: &'a [AttemptSet],
    bucket: &PassRatioBucket,
) -> Vec<&'a AttemptSet> {
    sets.iter()
        .filter(|set| match pass_ratio(set) {
            Ok(ratio) => bucket.contains(ratio),
            Err(_) => false,
        })
        .collect()
}

/// One attempt set joined with its proof texts, as needed for pair building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptGroup {
    pub statement_id: String,
    /// Samples ordered by sample index.
    pub samples: Vec<(ProofAttempt, Verdict)>,
}

impl AttemptGroup {
    pub fn attempt_set(&self) -> AttemptSet {
        AttemptSet::new(
            self.statement_id.clone(),
            self.samples.iter().map(|(_, v)| v.clone()).collect(),
        )
    }

    pub fn from_records(records: &[crate::iterate::AttemptRecord]) -> Vec<AttemptGroup> {
        let mut grouped: indexmap::IndexMap<String, Vec<(ProofAttempt, Verdict)>> =
            indexmap::IndexMap::new();
        for record in records {
            let status = match record.status.as_str() {
                "pass" => VerdictStatus::Pass,
                "timeout" => VerdictStatus::Timeout,
                _ => VerdictStatus::Fail,
            };
            let verdict = Verdict {
                status,
                diagnostics: Vec::new(),
                wall_time_ms: record.wall_time_ms,
            };
            let attempt = ProofAttempt {
                statement_id: record.statement_id.clone(),
                proof_text: record.proof_text.clone(),
                sample_index: record.sample_index,
                producer: record.producer.clone(),
            };
            grouped
                .entry(record.statement_id.clone())
                .or_default()
                .push((attempt, verdict));
        }
        grouped
            .into_iter()
            .map(|(statement_id, mut samples)| {
                samples.sort_by_key(|(a, _)| a.sample_index);
                AttemptGroup {
                    statement_id,
                    samples,
                }
            })
            .collect()
    }
}

/// A chosen/rejected pair for preference optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub statement_id: String,
    pub chosen: ProofAttempt,
    pub rejected: ProofAttempt,
}

/// Export record with the pinned field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub statement_id: String,
    pub chosen_text: String,
    pub rejected_text: String,
}

impl From<&PreferencePair> for PairRecord {
    fn from(p: &PreferencePair) -> Self {
        PairRecord {
            statement_id: p.statement_id.clone(),
            chosen_text: p.chosen.proof_text.clone(),
            rejected_text: p.rejected.proof_text.clone(),
        }
    }
}

/// Why a statement produced no pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSkip {
    pub statement_id: String,
    pub reason: String,
}

fn proof_len(attempt: &ProofAttempt) -> usize {
    crate::text::normalize_newlines(&attempt.proof_text)
        .chars()
        .count()
}

/// Build one preference pair per statement.
///
/// The chosen proof is drawn uniformly among passes — or, when
/// `length_penalized`, is the shortest pass (ties broken by lowest sample
/// index). The rejected proof is drawn uniformly among non-passes (timeouts
/// included). Statements without both a pass and a non-pass are skipped with
/// a log entry. Output is ordered by statement id; draws are keyed by
/// `(seed, statement id)` so the result is order-independent.
pub fn build_dpo_pairs(
    selected: &[AttemptGroup],
    length_penalized: bool,
    seed: u64,
) -> (Vec<PreferencePair>, Vec<PairSkip>) {
    let mut pairs = Vec::new();
    let mut skips = Vec::new();
    for group in selected {
        let passes: Vec<&(ProofAttempt, Verdict)> = group
            .samples
            .iter()
            .filter(|(_, v)| v.status == VerdictStatus::Pass)
            .collect();
        let non_passes: Vec<&(ProofAttempt, Verdict)> = group
            .samples
            .iter()
            .filter(|(_, v)| v.status != VerdictStatus::Pass)
            .collect();
        if passes.is_empty() {
            skips.push(PairSkip {
                statement_id: group.statement_id.clone(),
                reason: "no passing proof".to_string(),
            });
            continue;
        }
        if non_passes.is_empty() {
            tracing::info!(statement = %group.statement_id, "no non-passing proof; skipping pair");
            skips.push(PairSkip {
                statement_id: group.statement_id.clone(),
                reason: "no non-passing proof".to_string(),
            });
            continue;
        }
        let chosen = if length_penalized {
            passes
                .iter()
                .min_by_key(|(a, _)| (proof_len(a), a.sample_index))
                .expect("non-empty")
                .0
                .clone()
        } else {
            let mut rng = derived_rng(seed, &format!("dpo-chosen:{}", group.statement_id));
            passes[rng.gen_range(0..passes.len())].0.clone()
        };
        let rejected = {
            let mut rng = derived_rng(seed, &format!("dpo-rejected:{}", group.statement_id));
            non_passes[rng.gen_range(0..non_passes.len())].0.clone()
        };
        pairs.push(PreferencePair {
            statement_id: group.statement_id.clone(),
            chosen,
            rejected,
        });
    }
    pairs.sort_by(|a, b| a.statement_id.cmp(&b.statement_id));
    skips.sort_by(|a, b| a.statement_id.cmp(&b.statement_id));
    (pairs, skips)
}

/// Scalar rewards per verification outcome. The timeout reward is restricted
/// to the studied settings {0, -8, -16}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub pass_reward: i32,
    pub fail_reward: i32,
    pub timeout_reward: i32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            pass_reward: DEFAULT_PASS_REWARD,
            fail_reward: DEFAULT_FAIL_REWARD,
            timeout_reward: DEFAULT_TIMEOUT_REWARD,
        }
    }
}

impl RewardConfig {
    pub fn with_timeout_reward(timeout_reward: i32) -> Result<Self, PrefDataError> {
        let config = RewardConfig {
            timeout_reward,
            ..Default::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PrefDataError> {
        if self.pass_reward <= self.fail_reward {
            return Err(PrefDataError::RewardOrder);
        }
        if ![0, -8, -16].contains(&self.timeout_reward) {
            return Err(PrefDataError::BadTimeoutReward(self.timeout_reward));
        }
        Ok(())
    }

    pub fn reward_for(&self, status: VerdictStatus) -> i32 {
        match status {
            VerdictStatus::Pass => self.pass_reward,
            VerdictStatus::Fail => self.fail_reward,
            VerdictStatus::Timeout => self.timeout_reward,
        }
    }
}

/// One reward per sample, in verdict order (sample index for complete sets).
pub fn assign_rewards(attempts: &AttemptSet, config: &RewardConfig) -> Vec<(u32, i32)> {
    attempts
        .verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| (i as u32, config.reward_for(v.status)))
        .collect()
}

/// Export record with the pinned field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub statement_id: String,
    pub sample_index: u32,
    pub status: String,
    pub reward: i32,
}

pub fn reward_records(attempts: &AttemptSet, config: &RewardConfig) -> Vec<RewardRecord> {
    attempts
        .verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| RewardRecord {
            statement_id: attempts.statement_id.clone(),
            sample_index: i as u32,
            status: match v.status {
                VerdictStatus::Pass => "pass".into(),
                VerdictStatus::Fail => "fail".into(),
                VerdictStatus::Timeout => "timeout".into(),
            },
            reward: config.reward_for(v.status),
        })
        .collect()
}

/// Arithmetic mean and population standard deviation of a group's rewards.
pub fn group_reward_summary(
    attempts: &AttemptSet,
    config: &RewardConfig,
) -> Result<(f64, f64), PrefDataError> {
    let n = attempts.n();
    if n < 2 {
        return Err(PrefDataError::GroupTooSmall(n));
    }
    let rewards: Vec<f64> = attempts
        .verdicts
        .iter()
        .map(|v| config.reward_for(v.status) as f64)
        .collect();
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    Ok((mean, variance.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Diagnostic;

    fn set(id: &str, pattern: &str) -> AttemptSet {
        let verdicts = pattern
            .chars()
            .map(|c| match c {
                'p' => Verdict::pass(1),
                't' => Verdict::timeout(50),
                _ => Verdict::fail(vec![Diagnostic::new("x", 1, 1)], 1),
            })
            .collect();
        AttemptSet::new(id, verdicts)
    }

    fn group(id: &str, pattern: &str) -> AttemptGroup {
        let samples = pattern
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let verdict = match c {
                    'p' => Verdict::pass(1),
                    't' => Verdict::timeout(50),
                    _ => Verdict::fail(vec![Diagnostic::new("x", 1, 1)], 1),
                };
                let attempt = ProofAttempt {
                    statement_id: id.to_string(),
                    proof_text: format!("proof-{id}-{i}"),
                    sample_index: i as u32,
                    producer: "m".to_string(),
                };
                (attempt, verdict)
            })
            .collect();
        AttemptGroup {
            statement_id: id.to_string(),
            samples,
        }
    }

    fn quarter_bucket() -> PassRatioBucket {
        PassRatioBucket::new(Ratio64::from_integer(0), Ratio64::new(1, 4)).unwrap()
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(
            pass_ratio(&set("a", "ppppffffffffffff")).unwrap(),
            Ratio64::new(1, 4)
        );
        assert_eq!(
            pass_ratio(&set("b", "ffffffffffffffff")).unwrap(),
            Ratio64::from_integer(0)
        );
        assert_eq!(
            pass_ratio(&set("c", "pppppfffffffffff")).unwrap(),
            Ratio64::new(5, 16)
        );
    }

    #[test]
    fn bucket_boundary_membership_is_exact() {
        let bucket = quarter_bucket();
        assert!(bucket.contains(Ratio64::new(1, 4)));
        assert!(!bucket.contains(Ratio64::from_integer(0)));
        assert!(!bucket.contains(Ratio64::new(5, 16)));
    }

    #[test]
    fn quarter_bucket_selects_c_1_through_4_of_16() {
        let bucket = quarter_bucket();
        // enumerate every pass count for n = 16
        let sets: Vec<AttemptSet> = (0..=16)
            .map(|c| {
                let pattern: String = (0..16).map(|i| if i < c { 'p' } else { 'f' }).collect();
                set(&format!("c{c}"), &pattern)
            })
            .collect();
        let kept = bucket_statements(&sets, &bucket);
        let kept_ids: Vec<&str> = kept.iter().map(|s| s.statement_id.as_str()).collect();
        assert_eq!(kept_ids, vec!["c1", "c2", "c3", "c4"]);
    }

    #[test]
    fn nested_buckets_nest_as_selections() {
        let sets: Vec<AttemptSet> = (0..=16)
            .map(|c| {
                let pattern: String = (0..16).map(|i| if i < c { 'p' } else { 'f' }).collect();
                set(&format!("c{c}"), &pattern)
            })
            .collect();
        let buckets = [
            PassRatioBucket::parse("0,1/4").unwrap(),
            PassRatioBucket::parse("0,1/2").unwrap(),
            PassRatioBucket::parse("0,3/4").unwrap(),
            PassRatioBucket::parse("0,1").unwrap(),
        ];
        let selections: Vec<Vec<&str>> = buckets
            .iter()
            .map(|b| {
                bucket_statements(&sets, b)
                    .iter()
                    .map(|s| s.statement_id.as_str())
                    .collect()
            })
            .collect();
        for window in selections.windows(2) {
            assert!(window[0].iter().all(|id| window[1].contains(id)));
        }
        assert_eq!(selections[3].len(), 16); // every c in 1..=16
    }

    #[test]
    fn bucket_spec_parsing() {
        assert_eq!(PassRatioBucket::parse("0,0.25").unwrap(), quarter_bucket());
        assert_eq!(PassRatioBucket::parse("0,1/4").unwrap(), quarter_bucket());
        assert!(PassRatioBucket::parse("0.5,0.25").is_err());
        assert!(PassRatioBucket::parse("nope").is_err());
    }

    #[test]
    fn forced_chosen_seeded_rejected() {
        let g = group("s", "pfffffffffffffff");
        let (pairs, skips) = build_dpo_pairs(&[g.clone()], false, 3);
        assert!(skips.is_empty());
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].chosen.proof_text, "proof-s-0");
        // independent replay of the rejected draw over the 15 non-passes
        let non_passes: Vec<u32> = (1..16).collect();
        let pick = derived_rng(3, "dpo-rejected:s").gen_range(0..non_passes.len());
        assert_eq!(pairs[0].rejected.sample_index, non_passes[pick]);
    }

    #[test]
    fn length_penalized_picks_shortest_pass() {
        let mut g = group("s", "pppf");
        g.samples[0].0.proof_text = "x".repeat(120);
        g.samples[1].0.proof_text = "y".repeat(85);
        g.samples[2].0.proof_text = "z".repeat(300);
        let (pairs, _) = build_dpo_pairs(&[g], true, 0);
        assert_eq!(pairs[0].chosen.proof_text.len(), 85);
    }

    #[test]
    fn length_penalized_ties_break_by_sample_index() {
        let mut g = group("s", "ppf");
        g.samples[0].0.proof_text = "aaaa".to_string();
        g.samples[1].0.proof_text = "bbbb".to_string();
        let (pairs, _) = build_dpo_pairs(&[g], true, 0);
        assert_eq!(pairs[0].chosen.sample_index, 0);
    }

    #[test]
    fn pairs_are_deterministic_under_seed() {
        let groups: Vec<AttemptGroup> = (0..10)
            .map(|i| group(&format!("s{i}"), "ppffppffttpfffpf"))
            .collect();
        let (a, _) = build_dpo_pairs(&groups, false, 11);
        let (b, _) = build_dpo_pairs(&groups, false, 11);
        assert_eq!(a, b);
        let (c, _) = build_dpo_pairs(&groups, false, 12);
        assert_ne!(a, c);
    }

    #[test]
    fn all_pass_set_is_skipped_with_log() {
        let g = group("s", "pppp");
        let (pairs, skips) = build_dpo_pairs(&[g], false, 0);
        assert!(pairs.is_empty());
        assert_eq!(skips.len(), 1);
        assert!(skips[0].reason.contains("non-passing"));
    }

    #[test]
    fn timeouts_are_eligible_as_rejected() {
        let g = group("s", "pttt");
        let (pairs, _) = build_dpo_pairs(&[g], false, 5);
        assert_eq!(pairs.len(), 1);
        assert!(pairs[0].rejected.sample_index >= 1);
    }

    #[test]
    fn default_rewards_match_studied_mapping() {
        let config = RewardConfig::default();
        let rewards = assign_rewards(&set("s", "pft"), &config);
        assert_eq!(rewards, vec![(0, 8), (1, -8), (2, -8)]);
    }

    #[test]
    fn timeout_reward_variants() {
        for (timeout_reward, expected) in [(0, 0), (-8, -8), (-16, -16)] {
            let config = RewardConfig::with_timeout_reward(timeout_reward).unwrap();
            let rewards = assign_rewards(&set("s", "pft"), &config);
            assert_eq!(rewards, vec![(0, 8), (1, -8), (2, expected)]);
        }
        assert!(RewardConfig::with_timeout_reward(-4).is_err());
    }

    #[test]
    fn all_pass_sixteen_rewards() {
        let config = RewardConfig::default();
        let rewards = assign_rewards(&set("s", &"p".repeat(16)), &config);
        assert_eq!(rewards.len(), 16);
        assert!(rewards.iter().all(|&(_, r)| r == 8));
    }

    #[test]
    fn group_summary_symmetric_case() {
        let config = RewardConfig::default();
        let pattern = format!("{}{}", "p".repeat(8), "f".repeat(8));
        let (mean, std) = group_reward_summary(&set("s", &pattern), &config).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(std, 8.0);
    }

    #[test]
    fn group_summary_all_fail() {
        let config = RewardConfig::default();
        let (mean, std) = group_reward_summary(&set("s", "ffff"), &config).unwrap();
        assert_eq!(mean, -8.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn group_summary_matches_long_form() {
        let config = RewardConfig::with_timeout_reward(-16).unwrap();
        let s = set("s", "pptfff");
        let (mean, std) = group_reward_summary(&s, &config).unwrap();
        let rewards = [8.0, 8.0, -16.0, -8.0, -8.0, -8.0];
        let expected_mean: f64 = rewards.iter().sum::<f64>() / 6.0;
        let expected_var: f64 = rewards
            .iter()
            .map(|r| (r - expected_mean).powi(2))
            .sum::<f64>()
            / 6.0;
        assert!((mean - expected_mean).abs() < 1e-12);
        assert!((std - expected_var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn group_summary_needs_two_samples() {
        let config = RewardConfig::default();
        assert!(matches!(
            group_reward_summary(&set("s", "p"), &config),
            Err(PrefDataError::GroupTooSmall(1))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reward_is_pure_function_of_status(pattern in "[pft]{2,20}") {
                let config = RewardConfig::default();
                let s = set("s", &pattern);
                let rewards = assign_rewards(&s, &config);
                for (i, ch) in pattern.chars().enumerate() {
                    let expected = match ch {
                        'p' => 8,
                        't' => -8,
                        _ => -8,
                    };
                    prop_assert_eq!(rewards[i].1, expected);
                }
            }

            #[test]
            fn emitted_pairs_satisfy_the_invariant(seed in 0u64..500, pattern in "[pft]{4,16}") {
                let g = group("s", &pattern);
                let (pairs, _) = build_dpo_pairs(&[g.clone()], seed % 2 == 0, seed);
                for pair in pairs {
                    let chosen = &g.samples[pair.chosen.sample_index as usize].1;
                    let rejected = &g.samples[pair.rejected.sample_index as usize].1;
                    prop_assert_eq!(chosen.status, VerdictStatus::Pass);
                    prop_assert!(rejected.status != VerdictStatus::Pass);
                }
            }
        }
    }
}
