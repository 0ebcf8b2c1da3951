//! Benchmark evaluation: pass@N computation with bootstrap uncertainty,
//! inference-scaling curves, cross-dataset correlation, and proof-style
//! statistics.
//!
//! Reported pass@N uses the empirical first-n definition: generate exactly N
//! samples, count a statement solved if any of them passes. The unbiased
//! estimator `1 - C(n-c, k)/C(n, k)` is provided for n > k analysis.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeded::derived_rng;
use crate::text::{count_try_tokens, normalize_newlines};
use crate::verify::{Verdict, VerdictStatus};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("statement `{statement_id}` has {available} samples but n = {requested}")]
    InsufficientSamples {
        statement_id: String,
        available: usize,
        requested: usize,
    },
    #[error("run contains no attempt sets")]
    EmptyRun,
    #[error("n must be at least 1")]
    ZeroN,
    #[error(
        "estimator bounds violated: need 0 <= c <= n and 1 <= k <= n, got n={n}, c={c}, k={k}"
    )]
    EstimatorBounds { n: u64, c: u64, k: u64 },
    #[error("bootstrap needs at least 2 replicates")]
    TooFewReplicates,
    #[error("budgets must be ascending")]
    BudgetsNotAscending,
    #[error("correlation needs at least 3 runs, got {0}")]
    TooFewRuns(usize),
    #[error("benchmark column `{0}` is constant; correlation is undefined")]
    ConstantColumn(String),
    #[error("rate matrix is ragged: run `{0}` has a different column count")]
    RaggedMatrix(String),
}

/// All sampled verdicts for one statement. The pass count `c` is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptSet {
    pub statement_id: String,
    pub verdicts: Vec<Verdict>,
}

impl AttemptSet {
    pub fn new(statement_id: impl Into<String>, verdicts: Vec<Verdict>) -> Self {
        AttemptSet {
            statement_id: statement_id.into(),
            verdicts,
        }
    }

    /// Total number of samples.
    pub fn n(&self) -> usize {
        self.verdicts.len()
    }

    /// Number of passing samples.
    pub fn c(&self) -> usize {
        self.verdicts
            .iter()
            .filter(|v| v.status == VerdictStatus::Pass)
            .count()
    }

    fn any_pass_in_first(&self, n: usize) -> bool {
        self.verdicts
            .iter()
            .take(n)
            .any(|v| v.status == VerdictStatus::Pass)
    }
}

/// Well-known benchmark names, with `custom:<tag>` for everything else.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum BenchmarkName {
    MiniF2fTest,
    MiniF2fValid,
    ProofNet,
    PutnamBench,
    LeanWorkbook,
    NuminaTest,
    Custom(String),
}

impl BenchmarkName {
    pub fn as_str(&self) -> &str {
        match self {
            BenchmarkName::MiniF2fTest => "minif2f_test",
            BenchmarkName::MiniF2fValid => "minif2f_valid",
            BenchmarkName::ProofNet => "proofnet",
            BenchmarkName::PutnamBench => "putnambench",
            BenchmarkName::LeanWorkbook => "leanworkbook",
            BenchmarkName::NuminaTest => "numinatest",
            BenchmarkName::Custom(s) => s,
        }
    }
}

impl From<String> for BenchmarkName {
    fn from(s: String) -> Self {
        match s.as_str() {
            "minif2f_test" => BenchmarkName::MiniF2fTest,
            "minif2f_valid" => BenchmarkName::MiniF2fValid,
            "proofnet" => BenchmarkName::ProofNet,
            "putnambench" => BenchmarkName::PutnamBench,
            "leanworkbook" => BenchmarkName::LeanWorkbook,
            "numinatest" => BenchmarkName::NuminaTest,
            _ => BenchmarkName::Custom(s),
        }
    }
}

impl From<BenchmarkName> for String {
    fn from(b: BenchmarkName) -> Self {
        b.as_str().to_string()
    }
}

/// A registry entry: where a benchmark's statements live and how many there are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub size: usize,
}

/// Benchmark name -> dataset path and split size.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkRegistry {
    pub benchmarks: BTreeMap<String, BenchmarkEntry>,
}

impl BenchmarkRegistry {
    /// The stock registry with the documented split sizes.
    pub fn builtin() -> Self {
        let mut benchmarks = BTreeMap::new();
        for (name, size) in [
            ("minif2f_test", 244),
            ("minif2f_valid", 244),
            ("proofnet", 371),
            ("putnambench", 644),
            ("leanworkbook", 140_000),
            ("numinatest", 250),
        ] {
            benchmarks.insert(name.to_string(), BenchmarkEntry { path: None, size });
        }
        BenchmarkRegistry { benchmarks }
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn expected_size(&self, name: &BenchmarkName) -> Option<usize> {
        self.benchmarks.get(name.as_str()).map(|e| e.size)
    }
}

/// One model's attempts over one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub benchmark: BenchmarkName,
    pub model: String,
    pub attempts: Vec<AttemptSet>,
}

impl BenchmarkRun {
    /// Check the one-attempt-set-per-statement bookkeeping against a registry.
    pub fn validate_size(&self, registry: &BenchmarkRegistry) -> Result<(), String> {
        match registry.expected_size(&self.benchmark) {
            Some(expected) if expected != self.attempts.len() => Err(format!(
                "benchmark `{}` expects {} statements, run has {}",
                self.benchmark.as_str(),
                expected,
                self.attempts.len()
            )),
            _ => Ok(()),
        }
    }
}

/// Empirical pass@N: the fraction of statements whose first `n` verdicts
/// contain at least one pass.
pub fn pass_at_n_empirical(run: &BenchmarkRun, n: usize) -> Result<f64, EvalError> {
    if n == 0 {
        return Err(EvalError::ZeroN);
    }
    if run.attempts.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    for set in &run.attempts {
        if set.n() < n {
            return Err(EvalError::InsufficientSamples {
                statement_id: set.statement_id.clone(),
                available: set.n(),
                requested: n,
            });
        }
    }
    let solved = run
        .attempts
        .iter()
        .filter(|s| s.any_pass_in_first(n))
        .count();
    Ok(solved as f64 / run.attempts.len() as f64)
}

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut result = BigInt::one();
    for i in 0..k {
        result = result * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    result
}

/// Unbiased estimator `1 - C(n-c, k) / C(n, k)`, exact.
///
/// The binomials are computed over big integers, so there is no overflow for
/// any n this pipeline sees (n = 10_000 included).
pub fn pass_at_k_unbiased(n: u64, c: u64, k: u64) -> Result<BigRational, EvalError> {
    if c > n || k == 0 || k > n {
        return Err(EvalError::EstimatorBounds { n, c, k });
    }
    let miss = BigRational::new(binomial(n - c, k), binomial(n, k));
    Ok(BigRational::one() - miss)
}

/// The estimator as an `f64`, for reporting.
pub fn pass_at_k_unbiased_f64(n: u64, c: u64, k: u64) -> Result<f64, EvalError> {
    Ok(pass_at_k_unbiased(n, c, k)?.to_f64().unwrap_or(f64::NAN))
}

/// Bootstrap mean and standard deviation of pass@N.
///
/// Each replicate resamples, per statement, which `n` of the available
/// samples are used (drawn with replacement over sample indices), then
/// recomputes the empirical rate. Deterministic under a fixed seed; the
/// standard deviation is the population form over replicates.
pub fn bootstrap_ci(
    run: &BenchmarkRun,
    n: usize,
    replicates: u32,
    seed: u64,
) -> Result<(f64, f64), EvalError> {
    if replicates < 2 {
        return Err(EvalError::TooFewReplicates);
    }
    // surface the same input errors as the point estimate
    pass_at_n_empirical(run, n)?;
    let mut rng = derived_rng(seed, "bootstrap");
    let total = run.attempts.len() as f64;
    let mut rates = Vec::with_capacity(replicates as usize);
    for _ in 0..replicates {
        let mut solved = 0usize;
        for set in &run.attempts {
            let available = set.n();
            let mut any_pass = false;
            for _ in 0..n {
                let pick = rng.gen_range(0..available);
                if set.verdicts[pick].status == VerdictStatus::Pass {
                    any_pass = true;
                }
            }
            if any_pass {
                solved += 1;
            }
        }
        rates.push(solved as f64 / total);
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let variance = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rates.len() as f64;
    Ok((mean, variance.sqrt()))
}

/// Empirical rates at a ladder of sampling budgets.
pub fn scaling_curve(
    run: &BenchmarkRun,
    budgets: &[usize],
) -> Result<Vec<(usize, f64)>, EvalError> {
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BudgetsNotAscending);
    }
    budgets
        .iter()
        .map(|&n| Ok((n, pass_at_n_empirical(run, n)?)))
        .collect()
}

/// Per-run rates over a set of benchmarks, the input to correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    pub benchmarks: Vec<String>,
    pub runs: Vec<String>,
    /// `rates[run][benchmark]`
    pub rates: Vec<Vec<f64>>,
}

/// Pearson correlation between every pair of benchmark columns. Symmetric,
/// with an exact unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub benchmarks: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn cross_dataset_correlation(matrix: &RateMatrix) -> Result<CorrelationMatrix, EvalError> {
    let runs = matrix.rates.len();
    if runs < 3 {
        return Err(EvalError::TooFewRuns(runs));
    }
    let cols = matrix.benchmarks.len();
    for (i, row) in matrix.rates.iter().enumerate() {
        if row.len() != cols {
            let name = matrix
                .runs
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("#{i}"));
            return Err(EvalError::RaggedMatrix(name));
        }
    }
    let column = |j: usize| -> Vec<f64> { matrix.rates.iter().map(|row| row[j]).collect() };
    for (j, name) in matrix.benchmarks.iter().enumerate() {
        let col = column(j);
        if col.iter().all(|&v| v == col[0]) {
            return Err(EvalError::ConstantColumn(name.clone()));
        }
    }
    let mut values = vec![vec![0.0; cols]; cols];
    for i in 0..cols {
        values[i][i] = 1.0;
        for j in (i + 1)..cols {
            let r = pearson(&column(i), &column(j));
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        benchmarks: matrix.benchmarks.clone(),
        values,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Length and try-tactic statistics for one proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStats {
    /// Characters of the proof text, newline-normalized.
    pub length: usize,
    /// Whitespace-delimited `try` tokens outside comments and strings.
    pub try_count: usize,
}

pub fn proof_stats(proof_text: &str) -> ProofStats {
    let normalized = normalize_newlines(proof_text);
    ProofStats {
        length: normalized.chars().count(),
        try_count: count_try_tokens(&normalized),
    }
}

/// Averages over a proof corpus; `empty` flags a zero-proof input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofStyleReport {
    pub count: usize,
    pub avg_length: f64,
    pub avg_try_count: f64,
    pub empty: bool,
}

pub fn proof_style_report<S: AsRef<str>>(proofs: &[S]) -> ProofStyleReport {
    if proofs.is_empty() {
        return ProofStyleReport {
            count: 0,
            avg_length: 0.0,
            avg_try_count: 0.0,
            empty: true,
        };
    }
    let stats: Vec<ProofStats> = proofs.iter().map(|p| proof_stats(p.as_ref())).collect();
    let n = stats.len() as f64;
    ProofStyleReport {
        count: stats.len(),
        avg_length: stats.iter().map(|s| s.length as f64).sum::<f64>() / n,
        avg_try_count: stats.iter().map(|s| s.try_count as f64).sum::<f64>() / n,
        empty: false,
    }
}

/// Lenient loader: group JSONL records bearing `statement_id`, `status`, and
/// optionally `sample_index` into attempt sets, ordered by sample index (file
/// order where absent). Accepts both verdict exports and attempt records.
pub fn load_attempt_sets(path: &Path) -> Result<Vec<AttemptSet>, crate::corpus::CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        statement_id: String,
        status: String,
        #[serde(default)]
        sample_index: Option<u32>,
        #[serde(default)]
        wall_time_ms: u64,
        #[serde(default)]
        diagnostics: Vec<crate::verify::Diagnostic>,
    }
    let rows: Vec<Row> = crate::corpus::read_records(path)?;
    let mut grouped: indexmap::IndexMap<String, Vec<(u32, usize, Verdict)>> =
        indexmap::IndexMap::new();
    for (file_order, row) in rows.into_iter().enumerate() {
        let status = match row.status.as_str() {
            "pass" => VerdictStatus::Pass,
            "timeout" => VerdictStatus::Timeout,
            // unknown statuses (including per-job infrastructure errors)
            // conservatively count as failures
            _ => VerdictStatus::Fail,
        };
        let verdict = Verdict {
            status,
            diagnostics: row.diagnostics,
            wall_time_ms: row.wall_time_ms,
        };
        let index = row.sample_index.unwrap_or(file_order as u32);
        grouped
            .entry(row.statement_id)
            .or_default()
            .push((index, file_order, verdict));
    }
    Ok(grouped
        .into_iter()
        .map(|(statement_id, mut samples)| {
            samples.sort_by_key(|(index, file_order, _)| (*index, *file_order));
            AttemptSet {
                statement_id,
                verdicts: samples.into_iter().map(|(_, _, v)| v).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Diagnostic;

    fn verdicts(pattern: &str) -> Vec<Verdict> {
        pattern
            .chars()
            .map(|c| match c {
                'p' => Verdict::pass(1),
                't' => Verdict::timeout(100),
                _ => Verdict::fail(vec![Diagnostic::new("x", 1, 1)], 1),
            })
            .collect()
    }

    fn run(patterns: &[&str]) -> BenchmarkRun {
        BenchmarkRun {
            benchmark: BenchmarkName::Custom("toy".into()),
            model: "m".into(),
            attempts: patterns
                .iter()
                .enumerate()
                .map(|(i, p)| AttemptSet::new(format!("s{i}"), verdicts(p)))
                .collect(),
        }
    }

    #[test]
    fn empirical_boundaries() {
        assert_eq!(
            pass_at_n_empirical(&run(&["ffff", "ffff"]), 4).unwrap(),
            0.0
        );
        assert_eq!(
            pass_at_n_empirical(&run(&["pfff", "fpff"]), 4).unwrap(),
            1.0
        );
    }

    #[test]
    fn empirical_counts_first_n() {
        // pass indicators over first 2: (1, 0, 1, 1) -> 0.75
        let r = run(&["pf", "ffp", "fp", "pp"]);
        assert_eq!(pass_at_n_empirical(&r, 2).unwrap(), 0.75);
    }

    #[test]
    fn empirical_errors() {
        assert!(matches!(
            pass_at_n_empirical(&run(&["pf"]), 3),
            Err(EvalError::InsufficientSamples { .. })
        ));
        assert!(matches!(
            pass_at_n_empirical(&run(&[]), 1),
            Err(EvalError::EmptyRun)
        ));
        assert!(matches!(
            pass_at_n_empirical(&run(&["pf"]), 0),
            Err(EvalError::ZeroN)
        ));
    }

    #[test]
    fn run_size_validation_against_registry() {
        let registry = BenchmarkRegistry::builtin();
        assert_eq!(
            registry.expected_size(&BenchmarkName::MiniF2fTest),
            Some(244)
        );
        assert_eq!(registry.expected_size(&BenchmarkName::ProofNet), Some(371));
        assert_eq!(
            registry.expected_size(&BenchmarkName::PutnamBench),
            Some(644)
        );
        assert_eq!(
            registry.expected_size(&BenchmarkName::LeanWorkbook),
            Some(140_000)
        );
        assert_eq!(
            registry.expected_size(&BenchmarkName::NuminaTest),
            Some(250)
        );
        let mut r = run(&["pf", "pf"]);
        r.benchmark = BenchmarkName::NuminaTest;
        assert!(r.validate_size(&registry).is_err());
        r.benchmark = BenchmarkName::Custom("unregistered".into());
        assert!(r.validate_size(&registry).is_ok());
    }

    #[test]
    fn estimator_boundaries() {
        for k in 1..=8u64 {
            assert_eq!(pass_at_k_unbiased(8, 0, k).unwrap(), BigRational::zero());
            assert_eq!(pass_at_k_unbiased(8, 8, k).unwrap(), BigRational::one());
        }
    }

    #[test]
    fn estimator_bounds_checked() {
        assert!(pass_at_k_unbiased(8, 9, 1).is_err());
        assert!(pass_at_k_unbiased(8, 1, 0).is_err());
        assert!(pass_at_k_unbiased(8, 1, 9).is_err());
    }

    /// Exhaustive oracle: over all C(n, k) subsets of sample positions, the
    /// fraction containing at least one of the first `c` positions.
    fn subset_oracle(n: u64, c: u64, k: u64) -> BigRational {
        let n_us = n as usize;
        let k_us = k as usize;
        let mut total = 0u64;
        let mut hit = 0u64;
        let mut subset: Vec<usize> = (0..k_us).collect();
        loop {
            total += 1;
            if subset.iter().any(|&i| (i as u64) < c) {
                hit += 1;
            }
            // next k-combination in lexicographic order
            let mut i = k_us;
            loop {
                if i == 0 {
                    return BigRational::new(BigInt::from(hit), BigInt::from(total));
                }
                i -= 1;
                if subset[i] != i + n_us - k_us {
                    subset[i] += 1;
                    for j in i + 1..k_us {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn estimator_matches_exhaustive_enumeration_16_4_8() {
        let estimate = pass_at_k_unbiased(16, 4, 8).unwrap();
        assert_eq!(estimate, subset_oracle(16, 4, 8));
        // 1 - C(12,8)/C(16,8) = 1 - 495/12870 = 275/286
        assert_eq!(
            estimate,
            BigRational::new(BigInt::from(275), BigInt::from(286))
        );
    }

    #[test]
    fn estimator_monotone_in_k_and_c() {
        for c in 0..=10u64 {
            for k in 1..10u64 {
                let a = pass_at_k_unbiased(10, c, k).unwrap();
                let b = pass_at_k_unbiased(10, c, k + 1).unwrap();
                assert!(a <= b, "not monotone in k at c={c}, k={k}");
            }
        }
        for k in 1..=10u64 {
            for c in 0..10u64 {
                let a = pass_at_k_unbiased(10, c, k).unwrap();
                let b = pass_at_k_unbiased(10, c + 1, k).unwrap();
                assert!(a <= b, "not monotone in c at c={c}, k={k}");
            }
        }
    }

    #[test]
    fn estimator_survives_large_n() {
        let value = pass_at_k_unbiased_f64(10_000, 100, 32).unwrap();
        assert!(value > 0.0 && value < 1.0);
    }

    #[test]
    fn bootstrap_degenerate_all_pass() {
        let r = run(&["pppp", "pppp", "pppp"]);
        let (mean, std) = bootstrap_ci(&r, 4, 50, 7).unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn bootstrap_deterministic_under_seed() {
        let r = run(&["pfff", "ffpf", "ffff", "pppf"]);
        let a = bootstrap_ci(&r, 4, 200, 99).unwrap();
        let b = bootstrap_ci(&r, 4, 200, 99).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        let c = bootstrap_ci(&r, 4, 200, 100).unwrap();
        assert!(a != c);
    }

    #[test]
    fn bootstrap_std_within_analytic_binomial_bound() {
        // 244 statements, each with a single sample that passes with
        // probability one half: the bootstrap std of the mean must sit below
        // sqrt(0.25 / 244) ~ 0.032
        let mut rng = derived_rng(5, "fixture");
        let patterns: Vec<String> = (0..244)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    "p".to_string()
                } else {
                    "f".to_string()
                }
            })
            .collect();
        let refs: Vec<&str> = patterns.iter().map(|s| s.as_str()).collect();
        let r = run(&refs);
        let (_, std) = bootstrap_ci(&r, 1, 500, 11).unwrap();
        assert!(std >= 0.0);
        assert!(std <= 0.05, "std {std} outside analytic bound");
    }

    #[test]
    fn bootstrap_replicate_guard() {
        let r = run(&["pf"]);
        assert!(matches!(
            bootstrap_ci(&r, 1, 1, 0),
            Err(EvalError::TooFewReplicates)
        ));
    }

    #[test]
    fn scaling_curve_single_point_and_monotonicity() {
        let r = run(&["pfff", "ffff", "fpff", "fffp"]);
        let single = scaling_curve(&r, &[1]).unwrap();
        assert_eq!(single, vec![(1, 0.25)]);
        let curve = scaling_curve(&r, &[1, 2, 4]).unwrap();
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn scaling_curve_exact_fixture() {
        // constructed so pass@1 = 0.25 and pass@4 = 0.5
        let r = run(&["pfff", "ffpf", "ffff", "ffff"]);
        let curve = scaling_curve(&r, &[1, 4]).unwrap();
        assert_eq!(curve, vec![(1, 0.25), (4, 0.5)]);
    }

    #[test]
    fn scaling_curve_requires_ascending_budgets() {
        let r = run(&["pf"]);
        assert!(matches!(
            scaling_curve(&r, &[2, 1]),
            Err(EvalError::BudgetsNotAscending)
        ));
    }

    fn matrix(rates: Vec<Vec<f64>>) -> RateMatrix {
        let cols = rates[0].len();
        RateMatrix {
            benchmarks: (0..cols).map(|i| format!("b{i}")).collect(),
            runs: (0..rates.len()).map(|i| format!("r{i}")).collect(),
            rates,
        }
    }

    #[test]
    fn correlation_identical_and_negated_columns() {
        let m = matrix(vec![
            vec![0.1, 0.1, 0.9],
            vec![0.5, 0.5, 0.5],
            vec![0.9, 0.9, 0.1],
        ]);
        let corr = cross_dataset_correlation(&m).unwrap();
        assert!((corr.values[0][1] - 1.0).abs() < 1e-12);
        assert!((corr.values[0][2] + 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(corr.values[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(corr.values[i][j], corr.values[j][i]);
            }
        }
    }

    #[test]
    fn correlation_matches_long_form_pearson() {
        let m = matrix(vec![
            vec![0.31, 0.55],
            vec![0.42, 0.51],
            vec![0.58, 0.49],
            vec![0.66, 0.40],
            vec![0.71, 0.38],
        ]);
        let corr = cross_dataset_correlation(&m).unwrap();
        // long-form computation over the two columns
        let x = [0.31, 0.42, 0.58, 0.66, 0.71];
        let y = [0.55, 0.51, 0.49, 0.40, 0.38];
        let mx = x.iter().sum::<f64>() / 5.0;
        let my = y.iter().sum::<f64>() / 5.0;
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let expected = cov / (vx.sqrt() * vy.sqrt());
        assert!((corr.values[0][1] - expected).abs() < 1e-9);
    }

    #[test]
    fn correlation_guards() {
        let m = matrix(vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        assert!(matches!(
            cross_dataset_correlation(&m),
            Err(EvalError::TooFewRuns(2))
        ));
        let m = matrix(vec![vec![0.5, 0.2], vec![0.5, 0.4], vec![0.5, 0.9]]);
        match cross_dataset_correlation(&m) {
            Err(EvalError::ConstantColumn(name)) => assert_eq!(name, "b0"),
            other => panic!("expected constant column error, got {other:?}"),
        }
    }

    #[test]
    fn style_report_empty_is_flagged() {
        let report = proof_style_report::<String>(&[]);
        assert!(report.empty);
        assert_eq!(report.count, 0);
        assert_eq!(report.avg_length, 0.0);
    }

    #[test]
    fn style_try_counting() {
        let stats = proof_stats("by\n  try norm_num\n  try ring");
        assert_eq!(stats.try_count, 2);
        assert_eq!(
            stats.length,
            "by\n  try norm_num\n  try ring".chars().count()
        );
    }

    #[test]
    fn style_length_is_newline_normalized() {
        assert_eq!(
            proof_stats("by\r\n  ring").length,
            proof_stats("by\n  ring").length
        );
    }

    #[test]
    fn load_attempt_sets_orders_by_sample_index() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write;
        writeln!(file, r#"{{"statement_id":"s1","sample_index":1,"status":"fail","producer":"m","proof_text":"x","wall_time_ms":2}}"#).unwrap();
        writeln!(file, r#"{{"statement_id":"s1","sample_index":0,"status":"pass","producer":"m","proof_text":"y","wall_time_ms":1}}"#).unwrap();
        writeln!(file, r#"{{"statement_id":"s2","sample_index":0,"status":"error","producer":"m","proof_text":"z","wall_time_ms":0}}"#).unwrap();
        file.flush().unwrap();
        let sets = load_attempt_sets(file.path()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].statement_id, "s1");
        assert_eq!(sets[0].verdicts[0].status, VerdictStatus::Pass);
        assert_eq!(sets[0].c(), 1);
        // infrastructure errors load conservatively as failures
        assert_eq!(sets[1].verdicts[0].status, VerdictStatus::Fail);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn estimator_equals_enumeration_small_n(n in 1u64..9, c_frac in 0.0f64..1.0, k_frac in 0.0f64..1.0) {
                let c = (c_frac * n as f64).floor() as u64;
                let k = 1 + (k_frac * (n - 1) as f64).floor() as u64;
                prop_assert_eq!(pass_at_k_unbiased(n, c, k).unwrap(), subset_oracle(n, c, k));
            }

            #[test]
            fn scaling_is_monotone_on_random_runs(seed in 0u64..1000) {
                let mut rng = derived_rng(seed, "prop-run");
                let patterns: Vec<String> = (0..20).map(|_| {
                    (0..8).map(|_| if rng.gen_bool(0.3) { 'p' } else { 'f' }).collect()
                }).collect();
                let refs: Vec<&str> = patterns.iter().map(|s| s.as_str()).collect();
                let r = run(&refs);
                let curve = scaling_curve(&r, &[1, 2, 4, 8]).unwrap();
                prop_assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
            }

            #[test]
            fn correlation_matrix_is_psd(seed in 0u64..300) {
                let mut rng = derived_rng(seed, "prop-corr");
                let rates: Vec<Vec<f64>> = (0..6).map(|_| {
                    (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()
                }).collect();
                let m = matrix(rates);
                let corr = match cross_dataset_correlation(&m) {
                    Ok(c) => c,
                    Err(EvalError::ConstantColumn(_)) => return Ok(()),
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                };
                // all principal minors of a 4x4 symmetric matrix
                let dims = corr.values.len();
                for mask in 1u32..(1 << dims) {
                    let idx: Vec<usize> = (0..dims).filter(|i| mask & (1 << i) != 0).collect();
                    let sub: Vec<Vec<f64>> = idx.iter()
                        .map(|&i| idx.iter().map(|&j| corr.values[i][j]).collect())
                        .collect();
                    prop_assert!(determinant(&sub) >= -1e-9);
                }
            }
        }

        fn determinant(m: &[Vec<f64>]) -> f64 {
            let n = m.len();
            if n == 1 {
                return m[0][0];
            }
            let mut det = 0.0;
            for j in 0..n {
                let minor: Vec<Vec<f64>> = (1..n)
                    .map(|i| (0..n).filter(|&c| c != j).map(|c| m[i][c]).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * m[0][j] * determinant(&minor);
            }
            det
        }
    }
}
