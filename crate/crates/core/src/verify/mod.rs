//! Parallel proof-verification harness: schedules check jobs against a
//! pluggable checker backend with per-job timeouts and classifies results as
//! pass, fail, or timeout. Infrastructure failures are recorded per job and
//! never abort a batch.

pub mod external;
pub mod toy;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::corpus::FormalStatement;

pub use external::ExternalChecker;
pub use toy::ToyChecker;

/// Token that closes a goal without proof; used by the compiling-correctness
/// test and by stripped sketches.
pub const ADMIT_PLACEHOLDER: &str = "sorry";

/// Default per-job timeout, configurable per job.
pub const DEFAULT_TIMEOUT_MS: u64 = 300_000;

/// After a timeout, grace period before forced termination of the child.
pub const KILL_GRACE_MS: u64 = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub message: String,
    pub line: u32,
    pub column: u32,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>, line: u32, column: u32) -> Self {
        Diagnostic {
            message: message.into(),
            line,
            column,
        }
    }
}

/// Outcome of checking one proof. Diagnostics are non-empty exactly when the
/// status is `fail`; a pass or fail completes within the configured timeout,
/// while a timeout's wall time is at least the timeout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub diagnostics: Vec<Diagnostic>,
    pub wall_time_ms: u64,
}

impl Verdict {
    pub fn pass(wall_time_ms: u64) -> Self {
        Verdict {
            status: VerdictStatus::Pass,
            diagnostics: Vec::new(),
            wall_time_ms,
        }
    }

    pub fn fail(diagnostics: Vec<Diagnostic>, wall_time_ms: u64) -> Self {
        let diagnostics = if diagnostics.is_empty() {
            vec![Diagnostic::new(
                "checker reported failure without diagnostics",
                1,
                1,
            )]
        } else {
            diagnostics
        };
        Verdict {
            status: VerdictStatus::Fail,
            diagnostics,
            wall_time_ms,
        }
    }

    pub fn timeout(wall_time_ms: u64) -> Self {
        Verdict {
            status: VerdictStatus::Timeout,
            diagnostics: Vec::new(),
            wall_time_ms,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

/// One unit of verification work.
#[derive(Debug, Clone)]
pub struct CheckJob {
    pub job_id: String,
    pub statement: FormalStatement,
    pub proof_text: String,
    pub timeout: Duration,
}

impl CheckJob {
    pub fn new(
        job_id: impl Into<String>,
        statement: FormalStatement,
        proof_text: impl Into<String>,
    ) -> Self {
        CheckJob {
            job_id: job_id.into(),
            statement,
            proof_text: proof_text.into(),
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

/// The complete candidate source unit for a job: header, statement body, and
/// the proof attached at the delimiter.
pub fn source_unit(statement: &FormalStatement, proof_text: &str) -> String {
    if statement.header.trim().is_empty() {
        statement.with_proof(proof_text)
    } else {
        format!(
            "{}\n\n{}",
            statement.header.trim_end(),
            statement.with_proof(proof_text)
        )
    }
}

/// A checker backend verifies one job at a time; implementations must be safe
/// for `pool_size` concurrent invocations.
pub trait CheckerBackend: Send + Sync {
    fn check(&self, job: &CheckJob) -> Result<Verdict, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckerKind {
    #[serde(alias = "toy_checker")]
    Toy,
    #[serde(alias = "external_compiler")]
    External,
}

/// Declarative checker configuration, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerBackendConfig {
    pub kind: CheckerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executable: Option<PathBuf>,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
    #[serde(default = "default_source_ext")]
    pub source_ext: String,
}

fn default_source_ext() -> String {
    "lean".to_string()
}

impl CheckerBackendConfig {
    pub fn toy() -> Self {
        CheckerBackendConfig {
            kind: CheckerKind::Toy,
            executable: None,
            args: Vec::new(),
            workdir: None,
            source_ext: default_source_ext(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn CheckerBackend>, BackendError> {
        match self.kind {
            CheckerKind::Toy => Ok(Box::new(ToyChecker::new())),
            CheckerKind::External => {
                let executable = self.executable.clone().ok_or_else(|| {
                    BackendError::Config("external checker requires an executable path".into())
                })?;
                if !executable.exists() {
                    return Err(BackendError::Config(format!(
                        "external checker executable `{}` does not exist",
                        executable.display()
                    )));
                }
                let workdir = self.workdir.clone().ok_or_else(|| {
                    BackendError::Config("external checker requires a working directory".into())
                })?;
                Ok(Box::new(ExternalChecker::new(
                    executable,
                    self.args.clone(),
                    workdir,
                    &self.source_ext,
                )))
            }
        }
    }
}

/// Check a single proof against a backend.
pub fn check_proof(job: &CheckJob, backend: &dyn CheckerBackend) -> Result<Verdict, BackendError> {
    backend.check(job)
}

/// Compiling-correctness test: does the statement elaborate with its proof
/// replaced by the admit placeholder? Statements without a proof delimiter
/// are rejected outright.
pub fn cc_test(
    statement: &FormalStatement,
    backend: &dyn CheckerBackend,
) -> Result<bool, BackendError> {
    if statement.proof_delimiter().is_none() {
        return Ok(false);
    }
    let job = CheckJob::new(
        format!("cc#{}", statement.id),
        statement.clone(),
        ADMIT_PLACEHOLDER,
    );
    Ok(backend.check(&job)?.status == VerdictStatus::Pass)
}

/// Terminal state of one job in a batch: a verdict, or an infrastructure
/// error that kept the backend from producing one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobResult {
    Verdict(Verdict),
    InfraError { message: String },
}

impl JobResult {
    pub fn verdict(&self) -> Option<&Verdict> {
        match self {
            JobResult::Verdict(v) => Some(v),
            JobResult::InfraError { .. } => None,
        }
    }
}

/// Per-job outcome of a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub statement_id: String,
    pub result: JobResult,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("duplicate job id `{0}` in batch")]
    DuplicateJobId(String),
    #[error("pool size must be at least 1")]
    ZeroPool,
}

/// Run a batch of check jobs on a bounded worker pool.
///
/// The result map is a pure function of the job set for deterministic
/// backends: it is keyed by job id and does not depend on pool size or
/// completion order. At most `pool_size` jobs are in flight at once.
pub fn verify_batch(
    jobs: Vec<CheckJob>,
    backend: &dyn CheckerBackend,
    pool_size: usize,
) -> Result<BTreeMap<String, JobOutcome>, VerifyError> {
    if pool_size == 0 {
        return Err(VerifyError::ZeroPool);
    }
    let mut seen = HashSet::new();
    for job in &jobs {
        if !seen.insert(job.job_id.clone()) {
            return Err(VerifyError::DuplicateJobId(job.job_id.clone()));
        }
    }

    let (job_tx, job_rx) = crossbeam_channel::unbounded::<CheckJob>();
    for job in jobs {
        job_tx.send(job).expect("queue is open");
    }
    drop(job_tx);

    let (out_tx, out_rx) = crossbeam_channel::unbounded::<(String, JobOutcome)>();
    std::thread::scope(|scope| {
        for _ in 0..pool_size {
            let job_rx = job_rx.clone();
            let out_tx = out_tx.clone();
            scope.spawn(move || {
                while let Ok(job) = job_rx.recv() {
                    let checked = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                        backend.check(&job)
                    }));
                    let result = match checked {
                        Ok(Ok(verdict)) => JobResult::Verdict(verdict),
                        Ok(Err(e)) => JobResult::InfraError {
                            message: e.to_string(),
                        },
                        Err(_) => JobResult::InfraError {
                            message: "checker panicked".into(),
                        },
                    };
                    let outcome = JobOutcome {
                        statement_id: job.statement.id.clone(),
                        result,
                    };
                    let _ = out_tx.send((job.job_id, outcome));
                }
            });
        }
        drop(out_tx);
    });

    let mut results = BTreeMap::new();
    while let Ok((job_id, outcome)) = out_rx.recv() {
        results.insert(job_id, outcome);
    }
    Ok(results)
}

/// Export record for one verdict, as written by `proofmill verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub job_id: String,
    pub statement_id: String,
    pub status: String,
    pub wall_time_ms: u64,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u32>,
}

impl VerdictRecord {
    pub fn from_outcome(job_id: &str, outcome: &JobOutcome, sample_index: Option<u32>) -> Self {
        match &outcome.result {
            JobResult::Verdict(v) => VerdictRecord {
                job_id: job_id.to_string(),
                statement_id: outcome.statement_id.clone(),
                status: match v.status {
                    VerdictStatus::Pass => "pass".into(),
                    VerdictStatus::Fail => "fail".into(),
                    VerdictStatus::Timeout => "timeout".into(),
                },
                wall_time_ms: v.wall_time_ms,
                diagnostics: v.diagnostics.clone(),
                sample_index,
            },
            JobResult::InfraError { message } => VerdictRecord {
                job_id: job_id.to_string(),
                statement_id: outcome.statement_id.clone(),
                status: "error".into(),
                wall_time_ms: 0,
                diagnostics: vec![Diagnostic::new(message.clone(), 0, 0)],
                sample_index,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FormalStatement, Formalizer};
    use std::collections::BTreeMap as Map;

    pub(crate) fn toy_stmt(id: &str, body: &str) -> FormalStatement {
        FormalStatement {
            id: id.to_string(),
            informal_id: None,
            formalizer: Formalizer::A,
            theorem_name: "t".to_string(),
            header: String::new(),
            body: body.to_string(),
            extra: Map::new(),
        }
    }

    #[test]
    fn empty_batch_gives_empty_map() {
        let backend = ToyChecker::new();
        let map = verify_batch(Vec::new(), &backend, 4).unwrap();
        assert!(map.is_empty());
    }

    #[test]
    fn duplicate_job_ids_rejected() {
        let backend = ToyChecker::new();
        let stmt = toy_stmt("s", "theorem t : 1 = 1 :=");
        let jobs = vec![
            CheckJob::new("j1", stmt.clone(), "by eval"),
            CheckJob::new("j1", stmt, "by eval"),
        ];
        assert!(matches!(
            verify_batch(jobs, &backend, 2),
            Err(VerifyError::DuplicateJobId(_))
        ));
    }

    #[test]
    fn zero_pool_rejected() {
        let backend = ToyChecker::new();
        assert!(matches!(
            verify_batch(Vec::new(), &backend, 0),
            Err(VerifyError::ZeroPool)
        ));
    }

    #[test]
    fn pool_size_does_not_change_results() {
        let backend = ToyChecker::new();
        let jobs: Vec<CheckJob> = (0..100)
            .map(|i| {
                let ok = i % 3 != 0;
                let body = if ok {
                    format!("theorem t{i} : {i} + 1 = {} :=", i + 1)
                } else {
                    format!("theorem t{i} : {i} + 1 = {} :=", i + 2)
                };
                CheckJob::new(
                    format!("job-{i}"),
                    toy_stmt(&format!("s{i}"), &body),
                    "by eval",
                )
            })
            .collect();
        let sequential = verify_batch(jobs.clone(), &backend, 1).unwrap();
        let parallel = verify_batch(jobs, &backend, 16).unwrap();
        assert_eq!(sequential, parallel);
        assert_eq!(sequential.len(), 100);
    }

    #[test]
    fn timeout_job_does_not_block_siblings() {
        let backend = ToyChecker::new();
        let mut jobs = vec![CheckJob::new(
            "sleeper",
            toy_stmt("slow", "theorem t : 1 = 1 :="),
            "sleep 10000",
        )
        .with_timeout(Duration::from_millis(100))];
        for i in 0..20 {
            jobs.push(CheckJob::new(
                format!("fast-{i}"),
                toy_stmt(&format!("s{i}"), &format!("theorem t : {i} = {i} :=")),
                "by eval",
            ));
        }
        let started = std::time::Instant::now();
        let results = verify_batch(jobs, &backend, 4).unwrap();
        assert!(started.elapsed() < Duration::from_secs(2));
        assert_eq!(results.len(), 21);
        let sleeper = results["sleeper"].result.verdict().unwrap();
        assert_eq!(sleeper.status, VerdictStatus::Timeout);
        assert!(sleeper.wall_time_ms >= 100);
        for i in 0..20 {
            let v = results[&format!("fast-{i}")].result.verdict().unwrap();
            assert_eq!(v.status, VerdictStatus::Pass);
        }
    }

    #[test]
    fn cc_test_examples() {
        let backend = ToyChecker::new();
        assert!(cc_test(&toy_stmt("a", "theorem t : 2 + 2 = 4 :="), &backend).unwrap());
        // even a false equation is syntactically fine
        assert!(cc_test(&toy_stmt("b", "theorem t : 2 + 2 = 5 :="), &backend).unwrap());
        assert!(!cc_test(&toy_stmt("c", "theorem t : ((2 + 2 = 4 :="), &backend).unwrap());
        assert!(!cc_test(&toy_stmt("d", ""), &backend).unwrap());
    }

    #[test]
    fn fail_verdict_always_has_diagnostics() {
        let v = Verdict::fail(Vec::new(), 3);
        assert_eq!(v.diagnostics.len(), 1);
    }
}
