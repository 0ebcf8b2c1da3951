//! The expert-iteration engine: per-iteration statement scheduling, proof
//! sampling via a prover backend, batch verification, cumulative solved-set
//! update, and SFT dataset emission.
//!
//! The loop is a single sequential controller; parallelism lives inside the
//! backend fan-outs (the verification pool, and whatever the prover server
//! does). With deterministic backends and fixed seeds a multi-iteration run
//! is reproducible record for record.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    self, merge_solved, CorpusError, FormalDataset, FormalStatement, ProofAttempt, SolvedSet,
};
use crate::prover::{ProveRequest, ProverBackend};
use crate::seeded::derived_seed;
use crate::verify::{verify_batch, CheckJob, CheckerBackend, JobResult, Verdict, VerifyError};

pub const DEFAULT_SAMPLES_PER_STATEMENT: u32 = 16;

#[derive(Debug, Error)]
pub enum IterateError {
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("unknown statement source `{name}` (declared sources: {known})")]
    UnknownSource { name: String, known: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Configuration for one expert-iteration round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub k: u32,
    #[serde(alias = "sources")]
    pub statement_sources: Vec<String>,
    #[serde(default = "default_samples")]
    pub samples_per_statement: u32,
    #[serde(default)]
    pub include_library_corpus: bool,
    pub seed: u64,
    #[serde(default = "default_resample")]
    pub resample_solved: bool,
}

fn default_samples() -> u32 {
    DEFAULT_SAMPLES_PER_STATEMENT
}

fn default_resample() -> bool {
    // the full statement set is re-attempted each round; proofs are collected
    // cumulatively either way
    true
}

/// Bookkeeping for one completed iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub k: u32,
    pub statements_attempted: usize,
    pub prover_calls: u64,
    pub skipped_statements: usize,
    pub newly_solved_count: usize,
    pub cumulative_solved_count: usize,
    pub per_source_solved: BTreeMap<String, usize>,
    pub wall_time_ms: u64,
}

/// Whether an SFT record came from a verified solve or the library corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SftSource {
    Solved,
    LibraryCorpus,
}

/// One supervised fine-tuning record: the statement re-serialized with its
/// retained proof attached at the proof delimiter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub header: String,
    pub body: String,
    pub proof_text: String,
    pub source: SftSource,
}

impl SftRecord {
    /// The whole-proof training text.
    pub fn render(&self) -> String {
        let stmt = format!("{} {}", self.body.trim_end(), self.proof_text);
        if self.header.trim().is_empty() {
            stmt
        } else {
            format!("{}\n\n{}", self.header.trim_end(), stmt)
        }
    }
}

/// Library-corpus entry: a statement that already ships with a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub id: String,
    pub header: String,
    pub body: String,
    pub proof_text: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Joined record of one proof attempt and its verdict, the working currency
/// of evaluation and preference-data construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub statement_id: String,
    pub sample_index: u32,
    pub producer: String,
    pub proof_text: String,
    pub status: String,
    pub wall_time_ms: u64,
}

impl AttemptRecord {
    pub fn new(attempt: &ProofAttempt, verdict: &Verdict) -> Self {
        AttemptRecord {
            statement_id: attempt.statement_id.clone(),
            sample_index: attempt.sample_index,
            producer: attempt.producer.clone(),
            proof_text: attempt.proof_text.clone(),
            status: match verdict.status {
                crate::verify::VerdictStatus::Pass => "pass".into(),
                crate::verify::VerdictStatus::Fail => "fail".into(),
                crate::verify::VerdictStatus::Timeout => "timeout".into(),
            },
            wall_time_ms: verdict.wall_time_ms,
        }
    }
}

/// Everything produced by one iteration.
pub struct IterationOutcome {
    pub solved: SolvedSet,
    pub report: IterationReport,
    pub sft: Vec<SftRecord>,
    pub attempts: Vec<AttemptRecord>,
}

/// Execution context for an iteration: resolved statement sources, backends,
/// verification pool size, and per-job timeout.
pub struct IterationContext<'a> {
    pub sources: &'a [(String, FormalDataset)],
    pub library_corpus: Option<&'a [LibraryEntry]>,
    pub prover: &'a dyn ProverBackend,
    pub checker: &'a dyn CheckerBackend,
    pub pool_size: usize,
    pub timeout: std::time::Duration,
    pub producer_tag: String,
}

/// Run one expert-iteration round.
///
/// Every scheduled statement (all of them under `resample_solved`, otherwise
/// only the unsolved ones) gets `samples_per_statement` proofs requested from
/// the prover; all samples are verified on the pool; passing statements merge
/// into the solved set with this iteration's index; the SFT dataset is
/// rebuilt from the merged set. A prover failure skips that statement and the
/// iteration continues.
pub fn run_iteration(
    config: &IterationConfig,
    ctx: &IterationContext<'_>,
    solved: &SolvedSet,
) -> Result<IterationOutcome, IterateError> {
    let started = Instant::now();

    // resolve the scheduled statement set, first source wins on id collision
    let known: BTreeSet<&str> = ctx.sources.iter().map(|(n, _)| n.as_str()).collect();
    for name in &config.statement_sources {
        if !known.contains(name.as_str()) {
            return Err(IterateError::UnknownSource {
                name: name.clone(),
                known: known.iter().copied().collect::<Vec<_>>().join(", "),
            });
        }
    }
    let mut scheduled: Vec<(&str, &FormalStatement)> = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for name in &config.statement_sources {
        let (source_name, dataset) = ctx
            .sources
            .iter()
            .find(|(n, _)| n == name)
            .expect("validated above");
        for stmt in dataset.iter() {
            if seen.insert(stmt.id.as_str()) {
                scheduled.push((source_name.as_str(), stmt));
            }
        }
    }
    if !config.resample_solved {
        scheduled.retain(|(_, stmt)| !solved.contains(&stmt.id));
    }

    // fan out proof sampling, then verify everything in one batch
    let mut jobs: Vec<CheckJob> = Vec::new();
    let mut attempts_by_job: BTreeMap<String, ProofAttempt> = BTreeMap::new();
    let mut statement_source: BTreeMap<String, String> = BTreeMap::new();
    let mut prover_calls = 0u64;
    let mut skipped = 0usize;
    for (source_name, stmt) in &scheduled {
        statement_source.insert(stmt.id.clone(), source_name.to_string());
        let request = ProveRequest {
            statement_id: stmt.id.clone(),
            header: stmt.header.clone(),
            body: stmt.body.clone(),
            num_samples: config.samples_per_statement,
            seed: derived_seed(config.seed, &format!("prove:{}", stmt.id)),
        };
        let proofs = match ctx.prover.prove(&request) {
            Ok(response) => response.proofs,
            Err(e) => {
                tracing::warn!(statement = %stmt.id, error = %e, "prover failed; skipping statement");
                skipped += 1;
                continue;
            }
        };
        prover_calls += config.samples_per_statement as u64;
        for (i, proof_text) in proofs
            .into_iter()
            .take(config.samples_per_statement as usize)
            .enumerate()
        {
            let job_id = format!("{}#{}", stmt.id, i);
            attempts_by_job.insert(
                job_id.clone(),
                ProofAttempt {
                    statement_id: stmt.id.clone(),
                    proof_text: proof_text.clone(),
                    sample_index: i as u32,
                    producer: ctx.producer_tag.clone(),
                },
            );
            jobs.push(CheckJob::new(job_id, (*stmt).clone(), proof_text).with_timeout(ctx.timeout));
        }
    }
    let results = verify_batch(jobs, ctx.checker, ctx.pool_size)?;

    // group verdicts per statement, keeping attempt records for downstream
    let mut attempts: Vec<AttemptRecord> = Vec::new();
    let mut passing: BTreeMap<String, Vec<(ProofAttempt, Verdict)>> = BTreeMap::new();
    for (job_id, outcome) in &results {
        let attempt = &attempts_by_job[job_id];
        match &outcome.result {
            JobResult::Verdict(verdict) => {
                attempts.push(AttemptRecord::new(attempt, verdict));
                if verdict.passed() {
                    passing
                        .entry(attempt.statement_id.clone())
                        .or_default()
                        .push((attempt.clone(), verdict.clone()));
                }
            }
            JobResult::InfraError { message } => {
                tracing::warn!(job = %job_id, error = %message, "infrastructure error during verification");
            }
        }
    }
    attempts
        .sort_by(|a, b| (&a.statement_id, a.sample_index).cmp(&(&b.statement_id, b.sample_index)));
    for samples in passing.values_mut() {
        samples.sort_by_key(|(attempt, _)| attempt.sample_index);
    }

    let newly_verified: Vec<(FormalStatement, Vec<(ProofAttempt, Verdict)>)> = scheduled
        .iter()
        .filter_map(|(_, stmt)| {
            passing
                .remove(&stmt.id)
                .map(|proofs| ((*stmt).clone(), proofs))
        })
        .collect();
    let before = solved.len();
    let merged = merge_solved(solved, &newly_verified, config.k, config.seed)?;

    let per_source_solved = merged.counts_by(|entry| {
        statement_source
            .get(&entry.statement.id)
            .cloned()
            .unwrap_or_else(|| "earlier".to_string())
    });

    let library = if config.include_library_corpus {
        ctx.library_corpus
    } else {
        None
    };
    let sft = build_sft_dataset(&merged, library);

    let report = IterationReport {
        k: config.k,
        statements_attempted: scheduled.len(),
        prover_calls,
        skipped_statements: skipped,
        newly_solved_count: merged.len() - before,
        cumulative_solved_count: merged.len(),
        per_source_solved,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok(IterationOutcome {
        solved: merged,
        report,
        sft,
        attempts,
    })
}

/// Emit exactly one SFT record per solved statement, then the library corpus
/// when provided, duplicate-free by statement id.
pub fn build_sft_dataset(solved: &SolvedSet, library: Option<&[LibraryEntry]>) -> Vec<SftRecord> {
    let mut records = Vec::with_capacity(solved.len());
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for entry in solved.iter() {
        seen.insert(entry.statement.id.clone());
        records.push(SftRecord {
            header: entry.statement.header.clone(),
            body: entry.statement.body.clone(),
            proof_text: entry.proof.proof_text.clone(),
            source: SftSource::Solved,
        });
    }
    if let Some(library) = library {
        for entry in library {
            if seen.insert(entry.id.clone()) {
                records.push(SftRecord {
                    header: entry.header.clone(),
                    body: entry.body.clone(),
                    proof_text: entry.proof_text.clone(),
                    source: SftSource::LibraryCorpus,
                });
            }
        }
    }
    records
}

/// A parsed iteration schedule: named statement sources plus the ordered
/// iteration configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub sources: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library_corpus: Option<PathBuf>,
    #[serde(default, rename = "iteration")]
    pub iterations: Vec<IterationConfig>,
}

/// Parse and validate a TOML schedule file.
///
/// Iterations come back ordered by `k`; a repeated `k` is an error. Source
/// sets may shrink between iterations (arbitrary schedules are allowed) but
/// shrinkage is logged as a warning.
pub fn plan_schedule(path: &Path) -> Result<Schedule, IterateError> {
    let text = std::fs::read_to_string(path).map_err(|e| IterateError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    plan_schedule_str(&text)
}

pub fn plan_schedule_str(text: &str) -> Result<Schedule, IterateError> {
    let mut schedule: Schedule =
        toml::from_str(text).map_err(|e| IterateError::Schedule(e.to_string()))?;
    schedule.iterations.sort_by_key(|c| c.k);
    for pair in schedule.iterations.windows(2) {
        if pair[0].k == pair[1].k {
            return Err(IterateError::Schedule(format!(
                "iteration k={} declared twice",
                pair[0].k
            )));
        }
    }
    for config in &schedule.iterations {
        for source in &config.statement_sources {
            if !schedule.sources.contains_key(source) {
                return Err(IterateError::UnknownSource {
                    name: source.clone(),
                    known: schedule
                        .sources
                        .keys()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(", "),
                });
            }
        }
        if config.samples_per_statement == 0 {
            return Err(IterateError::Schedule(format!(
                "iteration k={} has samples_per_statement = 0",
                config.k
            )));
        }
    }
    for pair in schedule.iterations.windows(2) {
        let prev: BTreeSet<&String> = pair[0].statement_sources.iter().collect();
        let next: BTreeSet<&String> = pair[1].statement_sources.iter().collect();
        if !prev.is_subset(&next) {
            tracing::warn!(
                from_k = pair[0].k,
                to_k = pair[1].k,
                "statement sources shrink between iterations"
            );
        }
    }
    Ok(schedule)
}

/// Filesystem layout of an iteration run's state directory.
pub struct StateDir {
    pub root: PathBuf,
}

impl StateDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        StateDir { root: root.into() }
    }

    pub fn solved_path(&self) -> PathBuf {
        self.root.join("solved.jsonl")
    }

    pub fn iter_dir(&self, k: u32) -> PathBuf {
        self.root.join(format!("iter-{k:03}"))
    }

    pub fn report_path(&self, k: u32) -> PathBuf {
        self.iter_dir(k).join("report.json")
    }

    pub fn sft_path(&self, k: u32) -> PathBuf {
        self.iter_dir(k).join("sft.jsonl")
    }

    pub fn attempts_path(&self, k: u32) -> PathBuf {
        self.iter_dir(k).join("attempts.jsonl")
    }

    pub fn manifest_path(&self, source: &str) -> PathBuf {
        self.root.join("sources").join(format!("{source}.json"))
    }

    /// Record one manifest per statement source, for run bookkeeping.
    pub fn write_source_manifests(
        &self,
        sources: &[(String, FormalDataset)],
    ) -> Result<(), IterateError> {
        for (name, dataset) in sources {
            let manifest = crate::corpus::DatasetManifest::from_formal(name, dataset);
            manifest.validate()?;
            let path = self.manifest_path(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| IterateError::Io {
                    path: parent.display().to_string(),
                    source: e,
                })?;
            }
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            std::fs::write(&path, json).map_err(|e| IterateError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        Ok(())
    }

    /// Persist one iteration's outputs and update the cumulative solved set.
    pub fn write_iteration(&self, outcome: &IterationOutcome) -> Result<(), IterateError> {
        let k = outcome.report.k;
        let dir = self.iter_dir(k);
        std::fs::create_dir_all(&dir).map_err(|e| IterateError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        outcome.solved.write(&self.solved_path())?;
        corpus::write_records(&self.sft_path(k), outcome.sft.iter())?;
        corpus::write_records(&self.attempts_path(k), outcome.attempts.iter())?;
        let report_path = self.report_path(k);
        let json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
        std::fs::write(&report_path, json).map_err(|e| IterateError::Io {
            path: report_path.display().to_string(),
            source: e,
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Formalizer;
    use crate::prover::{EvalProver, FnProver, ProveResponse, ScriptedProver};
    use crate::verify::ToyChecker;
    use std::time::Duration;

    fn toy_statement(id: &str, truthy: bool) -> FormalStatement {
        let (lhs, rhs) = if truthy {
            ("1 + 1", "2")
        } else {
            ("1 + 1", "3")
        };
        FormalStatement {
            id: id.to_string(),
            informal_id: None,
            formalizer: Formalizer::A,
            theorem_name: format!("t_{id}"),
            header: String::new(),
            body: format!("theorem t_{id} : {lhs} = {rhs} :="),
            extra: BTreeMap::new(),
        }
    }

    fn context<'a>(
        sources: &'a [(String, FormalDataset)],
        prover: &'a dyn ProverBackend,
        checker: &'a dyn CheckerBackend,
    ) -> IterationContext<'a> {
        IterationContext {
            sources,
            library_corpus: None,
            prover,
            checker,
            pool_size: 4,
            timeout: Duration::from_secs(5),
            producer_tag: "test-prover".to_string(),
        }
    }

    fn config(k: u32, sources: &[&str], samples: u32) -> IterationConfig {
        IterationConfig {
            k,
            statement_sources: sources.iter().map(|s| s.to_string()).collect(),
            samples_per_statement: samples,
            include_library_corpus: false,
            seed: 42,
            resample_solved: true,
        }
    }

    #[test]
    fn prover_that_proves_nothing_changes_nothing() {
        let dataset: FormalDataset = (0..10)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = ScriptedProver::new([]);
        let checker = ToyChecker::new();
        let outcome = run_iteration(
            &config(0, &["main"], 4),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        assert_eq!(outcome.report.newly_solved_count, 0);
        assert_eq!(outcome.report.cumulative_solved_count, 0);
        assert!(outcome.solved.is_empty());
        assert_eq!(outcome.report.statements_attempted, 10);
        assert_eq!(outcome.report.prover_calls, 40);
    }

    #[test]
    fn even_digit_prover_solves_half_of_100() {
        let dataset: FormalDataset = (0..100)
            .map(|i| toy_statement(&format!("stmt-{i:03}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        // statement ids ending in an even digit get a working proof
        let prover = FnProver(|request: &ProveRequest| {
            let last = request
                .statement_id
                .chars()
                .last()
                .unwrap()
                .to_digit(10)
                .unwrap();
            let proof = if last % 2 == 0 {
                "by eval"
            } else {
                "-- no idea"
            };
            Ok(ProveResponse {
                proofs: vec![proof.to_string(); request.num_samples as usize],
            })
        });
        let checker = ToyChecker::new();
        let outcome = run_iteration(
            &config(0, &["main"], 4),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        assert_eq!(outcome.report.newly_solved_count, 50);
        assert_eq!(outcome.report.cumulative_solved_count, 50);
    }

    #[test]
    fn growing_prover_yields_nondecreasing_cumulative_counts() {
        let dataset: FormalDataset = (0..30)
            .map(|i| toy_statement(&format!("s{i:02}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let checker = ToyChecker::new();
        let mut solved = SolvedSet::new();
        let mut cumulative = Vec::new();
        for k in 0..3u32 {
            // success set grows with each round: ids below 10*(k+1)
            let limit = (k as usize + 1) * 10;
            let prover = FnProver(move |request: &ProveRequest| {
                let n: usize = request.statement_id[1..].parse().unwrap();
                let proof = if n < limit { "by eval" } else { "-- nope" };
                Ok(ProveResponse {
                    proofs: vec![proof.to_string(); request.num_samples as usize],
                })
            });
            let mut cfg = config(k, &["main"], 2);
            cfg.seed = 7;
            let outcome =
                run_iteration(&cfg, &context(&sources, &prover, &checker), &solved).unwrap();
            cumulative.push(outcome.report.cumulative_solved_count);
            assert_eq!(outcome.report.k, k);
            solved = outcome.solved;
        }
        assert!(cumulative.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(cumulative, vec![10, 20, 30]);
        // entries remember the iteration that found them
        assert_eq!(solved.get("s05").unwrap().iteration_found, 0);
        assert_eq!(solved.get("s15").unwrap().iteration_found, 1);
        assert_eq!(solved.get("s25").unwrap().iteration_found, 2);
    }

    #[test]
    fn unsolved_only_scheduling_skips_solved() {
        let dataset: FormalDataset = (0..10)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = EvalProver;
        let checker = ToyChecker::new();
        let first = run_iteration(
            &config(0, &["main"], 2),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        assert_eq!(first.solved.len(), 10);
        let mut cfg = config(1, &["main"], 2);
        cfg.resample_solved = false;
        let second =
            run_iteration(&cfg, &context(&sources, &prover, &checker), &first.solved).unwrap();
        assert_eq!(second.report.statements_attempted, 0);
        assert_eq!(second.report.prover_calls, 0);
        assert_eq!(second.solved.len(), 10);
    }

    #[test]
    fn prover_failure_skips_and_continues() {
        let dataset: FormalDataset = (0..6)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = FnProver(|request: &ProveRequest| {
            if request.statement_id == "s3" {
                Err(crate::backend::BackendError::Protocol("boom".into()))
            } else {
                Ok(ProveResponse {
                    proofs: vec!["by eval".to_string(); request.num_samples as usize],
                })
            }
        });
        let checker = ToyChecker::new();
        let outcome = run_iteration(
            &config(0, &["main"], 2),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        assert_eq!(outcome.report.skipped_statements, 1);
        assert_eq!(outcome.report.cumulative_solved_count, 5);
        assert!(!outcome.solved.contains("s3"));
    }

    #[test]
    fn budget_accounting_holds() {
        let dataset: FormalDataset = (0..7)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = EvalProver;
        let checker = ToyChecker::new();
        let outcome = run_iteration(
            &config(0, &["main"], 16),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        assert_eq!(outcome.report.prover_calls, 7 * 16);
        assert_eq!(outcome.attempts.len(), 7 * 16);
    }

    #[test]
    fn sft_dataset_counts() {
        let dataset: FormalDataset = (0..10)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = EvalProver;
        let checker = ToyChecker::new();
        let outcome = run_iteration(
            &config(0, &["main"], 1),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        assert_eq!(outcome.sft.len(), 10);

        let library: Vec<LibraryEntry> = (0..104)
            .map(|i| LibraryEntry {
                id: format!("lib{i}"),
                header: String::new(),
                body: format!("theorem lib{i} : {i} = {i} :="),
                proof_text: "by eval".to_string(),
                extra: BTreeMap::new(),
            })
            .collect();
        let records = build_sft_dataset(&outcome.solved, Some(&library));
        assert_eq!(records.len(), 114);
        assert_eq!(
            records
                .iter()
                .filter(|r| r.source == SftSource::LibraryCorpus)
                .count(),
            104
        );
    }

    #[test]
    fn sft_is_duplicate_free_by_statement_id() {
        let dataset: FormalDataset = (0..3)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = EvalProver;
        let checker = ToyChecker::new();
        let outcome = run_iteration(
            &config(0, &["main"], 1),
            &context(&sources, &prover, &checker),
            &SolvedSet::new(),
        )
        .unwrap();
        // a library entry whose id collides with a solved statement is dropped
        let library = vec![LibraryEntry {
            id: "s1".to_string(),
            header: String::new(),
            body: "theorem t_s1 : 1 + 1 = 2 :=".to_string(),
            proof_text: "by eval".to_string(),
            extra: BTreeMap::new(),
        }];
        let records = build_sft_dataset(&outcome.solved, Some(&library));
        assert_eq!(records.len(), 3);
    }

    #[test]
    fn sft_emission_is_deterministic() {
        let dataset: FormalDataset = (0..5)
            .map(|i| toy_statement(&format!("s{i}"), true))
            .collect();
        let sources = vec![("main".to_string(), dataset)];
        let prover = EvalProver;
        let checker = ToyChecker::new();
        let cfg = config(0, &["main"], 3);
        let ctx = context(&sources, &prover, &checker);
        let a = run_iteration(&cfg, &ctx, &SolvedSet::new()).unwrap();
        let b = run_iteration(&cfg, &ctx, &SolvedSet::new()).unwrap();
        let bytes = |records: &[SftRecord]| {
            records
                .iter()
                .map(|r| serde_json::to_string(r).unwrap())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(bytes(&a.sft), bytes(&b.sft));
    }

    #[test]
    fn sft_render_appends_proof_at_delimiter() {
        let record = SftRecord {
            header: "import Mathlib".into(),
            body: "theorem t : 1 = 1 :=".into(),
            proof_text: "by eval".into(),
            source: SftSource::Solved,
        };
        assert_eq!(
            record.render(),
            "import Mathlib\n\ntheorem t : 1 = 1 := by eval"
        );
    }

    const SCHEDULE_TOML: &str = r#"
library_corpus = "library.jsonl"

[sources]
lwb = "lwb.jsonl"
form1 = "form1.jsonl"
form2 = "form2.jsonl"

[[iteration]]
k = 0
sources = ["lwb"]
samples_per_statement = 16
seed = 100

[[iteration]]
k = 1
sources = ["lwb", "form1"]
samples_per_statement = 16
seed = 101

[[iteration]]
k = 2
sources = ["lwb", "form1", "form2"]
samples_per_statement = 16
seed = 102
include_library_corpus = true
"#;

    #[test]
    fn schedule_mirrors_growth_pattern() {
        let schedule = plan_schedule_str(SCHEDULE_TOML).unwrap();
        assert_eq!(schedule.iterations.len(), 3);
        assert_eq!(schedule.iterations[0].statement_sources, vec!["lwb"]);
        assert_eq!(
            schedule.iterations[1].statement_sources,
            vec!["lwb", "form1"]
        );
        assert_eq!(
            schedule.iterations[2].statement_sources,
            vec!["lwb", "form1", "form2"]
        );
        assert!(schedule.iterations[2].include_library_corpus);
        assert!(!schedule.iterations[0].include_library_corpus);
        assert!(schedule.iterations.iter().all(|c| c.resample_solved));
    }

    #[test]
    fn empty_schedule_is_empty_plan() {
        let schedule = plan_schedule_str("").unwrap();
        assert!(schedule.iterations.is_empty());
    }

    #[test]
    fn shrinking_sources_parse_with_a_warning() {
        let text = r#"
[sources]
a = "a.jsonl"
b = "b.jsonl"

[[iteration]]
k = 0
sources = ["a", "b"]
seed = 1

[[iteration]]
k = 1
sources = ["a"]
seed = 2
"#;
        // shrinkage is permitted (warned about, not rejected)
        let schedule = plan_schedule_str(text).unwrap();
        assert_eq!(schedule.iterations[1].statement_sources, vec!["a"]);
    }

    #[test]
    fn repeated_k_is_an_error() {
        let text = r#"
[sources]
a = "a.jsonl"

[[iteration]]
k = 0
sources = ["a"]
seed = 1

[[iteration]]
k = 0
sources = ["a"]
seed = 2
"#;
        let err = plan_schedule_str(text).unwrap_err();
        assert!(err.to_string().contains("twice"));
    }

    #[test]
    fn unknown_source_is_an_error() {
        let text = r#"
[[iteration]]
k = 0
sources = ["ghost"]
seed = 1
"#;
        assert!(matches!(
            plan_schedule_str(text),
            Err(IterateError::UnknownSource { .. })
        ));
    }
}
