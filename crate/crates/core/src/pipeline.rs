//! End-to-end pipeline composition over a run directory:
//! quality → iterate → eval → prefdata → sketch.
//!
//! Every run directory carries a manifest (config hash, seed, stage
//! versions) sufficient to replay the run; all randomness is derived from
//! the configured seed. Data artifacts are reproducible byte for byte on
//! rerun; wall-clock fields (iteration reports, attempt timings) are the
//! documented exception.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{build_checker, stage_versions, PipelineConfig};
use crate::corpus::{self, FormalDataset, FormalStatement, ProofAttempt, SolvedSet};
use crate::evaluate::{
    bootstrap_ci, load_attempt_sets, pass_at_n_empirical, scaling_curve, AttemptSet,
};
use crate::iterate::{plan_schedule, run_iteration, IterationContext, LibraryEntry, StateDir};
use crate::prefdata::{
    bucket_statements, build_dpo_pairs, reward_records, AttemptGroup, PairRecord, PassRatioBucket,
    RewardConfig,
};
use crate::quality::{
    fc_judge, gate_report, parse_threshold, select_candidates, Candidate, CandidateBundle,
    GateReport, JudgeBackend,
};
use crate::sketch::{run_sketch_pipeline, simplify_statements};
use crate::verify::{cc_test, CheckerBackend};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Quality,
    Iterate,
    Eval,
    PrefData,
    Sketch,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Quality,
        Stage::Iterate,
        Stage::Eval,
        Stage::PrefData,
        Stage::Sketch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Quality => "quality",
            Stage::Iterate => "iterate",
            Stage::Eval => "eval",
            Stage::PrefData => "prefdata",
            Stage::Sketch => "sketch",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        match s.trim() {
            "quality" => Ok(Stage::Quality),
            "iterate" => Ok(Stage::Iterate),
            "eval" => Ok(Stage::Eval),
            "prefdata" => Ok(Stage::PrefData),
            "sketch" => Ok(Stage::Sketch),
            other => bail!(
                "unknown stage `{other}` (expected quality, iterate, eval, prefdata, or sketch)"
            ),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Terminal state of one stage in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Failed {
        error: String,
    },
    /// Not run because a stage it depends on did not complete.
    Skipped {
        dependency: String,
    },
}

/// Replay manifest written at the root of every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<String>,
    pub stage_versions: BTreeMap<String, String>,
    pub tool_version: String,
}

/// Outcome of a pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub statuses: BTreeMap<String, StageStatus>,
}

impl RunSummary {
    pub fn all_completed(&self) -> bool {
        self.statuses
            .values()
            .all(|s| matches!(s, StageStatus::Completed))
    }
}

/// One informal problem plus every candidate formalization generated for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub informal_id: String,
    pub informal_text: String,
    pub candidates: Vec<FormalStatement>,
}

/// Output of the quality gate over a bundle corpus.
pub struct GateOutcome {
    pub selected: Vec<FormalStatement>,
    pub report: GateReport,
    pub flagged: Vec<FlaggedJudgment>,
}

/// A judge call that was conservatively counted inappropriate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlaggedJudgment {
    pub informal_id: String,
    pub candidate_id: String,
    pub judgment_index: u32,
    pub reason: String,
}

/// Run the full gate over bundles: CC test every candidate, judge it
/// `judgments` times, then select one valid candidate per formalizer.
pub fn gate_bundles(
    bundles: &[BundleRecord],
    checker: &dyn CheckerBackend,
    judge: &dyn JudgeBackend,
    judgments: u32,
    threshold: num::rational::Ratio<u32>,
    report_k: usize,
    seed: u64,
) -> Result<GateOutcome> {
    let mut populated = Vec::with_capacity(bundles.len());
    let mut flagged = Vec::new();
    for bundle in bundles {
        let informal = crate::corpus::InformalStatement {
            id: bundle.informal_id.clone(),
            source: crate::corpus::SourceTag::Custom("bundle".into()),
            text: bundle.informal_text.clone(),
            extra: BTreeMap::new(),
        };
        let mut candidates = Vec::with_capacity(bundle.candidates.len());
        for statement in &bundle.candidates {
            let cc = cc_test(statement, checker)
                .with_context(|| format!("cc test failed for `{}`", statement.id))?;
            let (fc, failures) = fc_judge(&informal, statement, judge, judgments, seed)?;
            for failure in failures {
                flagged.push(FlaggedJudgment {
                    informal_id: bundle.informal_id.clone(),
                    candidate_id: statement.id.clone(),
                    judgment_index: failure.judgment_index,
                    reason: failure.reason,
                });
            }
            candidates.push(Candidate {
                statement: statement.clone(),
                cc_pass: Some(cc),
                fc: Some(fc),
            });
        }
        populated.push(CandidateBundle {
            informal_id: bundle.informal_id.clone(),
            candidates,
        });
    }
    let report = gate_report(&populated, report_k, threshold)?;
    let mut selected = Vec::new();
    for bundle in &populated {
        selected.extend(select_candidates(bundle, threshold, seed)?);
    }
    Ok(GateOutcome {
        selected,
        report,
        flagged,
    })
}

/// Metrics emitted by the eval stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub statements: usize,
    pub n: usize,
    pub pass_at_n: f64,
    pub bootstrap_replicates: u32,
    pub bootstrap_mean: f64,
    pub bootstrap_std: f64,
    pub curve: Vec<(usize, f64)>,
}

/// Compute pass@N, bootstrap uncertainty, and the scaling curve over a set
/// of attempts. A budget beyond N or an N beyond the available samples is an
/// error, mirroring the underlying metrics.
pub fn eval_attempts(
    sets: Vec<AttemptSet>,
    n: usize,
    budgets: &[usize],
    replicates: u32,
    seed: u64,
) -> Result<EvalMetrics> {
    let run = crate::evaluate::BenchmarkRun {
        benchmark: crate::evaluate::BenchmarkName::Custom("pipeline".into()),
        model: "pipeline".into(),
        attempts: sets,
    };
    let budgets: Vec<usize> = budgets.iter().copied().filter(|&b| b <= n).collect();
    let pass = pass_at_n_empirical(&run, n)?;
    let (mean, std) = bootstrap_ci(&run, n, replicates, seed)?;
    let curve = if budgets.is_empty() {
        Vec::new()
    } else {
        scaling_curve(&run, &budgets)?
    };
    Ok(EvalMetrics {
        statements: run.attempts.len(),
        n,
        pass_at_n: pass,
        bootstrap_replicates: replicates,
        bootstrap_mean: mean,
        bootstrap_std: std,
        curve,
    })
}

/// Render the plot-ready `(budget, rate)` CSV.
pub fn curve_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("budget,rate\n");
    for (budget, rate) in curve {
        out.push_str(&format!("{budget},{rate}\n"));
    }
    out
}

fn append_log(run_dir: &Path, line: &str) -> Result<()> {
    let path = run_dir.join("pipeline.log");
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)?;
    writeln!(file, "{line}")?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// The dependency a stage cannot run without, if it is unmet. Eval and
/// preference data read the iterate stage's attempts unless the config
/// provides an external attempts file or a previous run already left one in
/// the run directory.
fn unmet_dependency(
    stage: Stage,
    config: &PipelineConfig,
    stages: &[Stage],
    statuses: &BTreeMap<String, StageStatus>,
) -> Option<Stage> {
    match stage {
        Stage::Eval | Stage::PrefData => {
            if config.corpora.attempts.is_some() {
                return None;
            }
            if stages.contains(&Stage::Iterate) {
                match statuses.get(Stage::Iterate.name()) {
                    Some(StageStatus::Completed) => None,
                    _ => Some(Stage::Iterate),
                }
            } else if attempts_path(config).is_ok() {
                // resumed run: a prior invocation produced the attempts
                None
            } else {
                Some(Stage::Iterate)
            }
        }
        _ => None,
    }
}

/// Execute the selected stages in order, writing outputs and the manifest
/// under the run directory. A stage failure halts the stages that depend on
/// it; independent stages still run.
pub fn run_pipeline(config: &PipelineConfig, stages: &[Stage]) -> Result<RunSummary> {
    std::fs::create_dir_all(&config.run_dir)
        .with_context(|| format!("creating run dir {}", config.run_dir.display()))?;
    let manifest = RunManifest {
        config_hash: config.config_hash.clone(),
        seed: config.seed,
        stages: stages.iter().map(|s| s.name().to_string()).collect(),
        stage_versions: stage_versions(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&config.run_dir.join("manifest.json"), &manifest)?;

    let mut statuses: BTreeMap<String, StageStatus> = BTreeMap::new();
    for &stage in stages {
        if let Some(dep) = unmet_dependency(stage, config, stages, &statuses) {
            let status = StageStatus::Skipped {
                dependency: dep.name().to_string(),
            };
            append_log(&config.run_dir, &format!("[{stage}] skipped (needs {dep})"))?;
            statuses.insert(stage.name().to_string(), status);
            continue;
        }
        append_log(&config.run_dir, &format!("[{stage}] started"))?;
        let result = match stage {
            Stage::Quality => stage_quality(config),
            Stage::Iterate => stage_iterate(config),
            Stage::Eval => stage_eval(config),
            Stage::PrefData => stage_prefdata(config),
            Stage::Sketch => stage_sketch(config),
        };
        let status = match result {
            Ok(()) => StageStatus::Completed,
            Err(e) => {
                tracing::error!(stage = stage.name(), error = %e, "stage failed");
                StageStatus::Failed {
                    error: format!("{e:#}"),
                }
            }
        };
        append_log(
            &config.run_dir,
            &format!(
                "[{stage}] {}",
                match &status {
                    StageStatus::Completed => "completed".to_string(),
                    StageStatus::Failed { error } => format!("failed: {error}"),
                    StageStatus::Skipped { .. } => unreachable!(),
                }
            ),
        )?;
        statuses.insert(stage.name().to_string(), status);
    }
    let summary = RunSummary { statuses };
    write_json(&config.run_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn stage_quality(config: &PipelineConfig) -> Result<()> {
    let bundles_path = config
        .corpora
        .bundles
        .as_ref()
        .context("quality stage requires corpora.bundles")?;
    let bundles: Vec<BundleRecord> = corpus::read_records(bundles_path)?;
    let checker = build_checker(config)?;
    let judge = config.backends.judge.build()?;
    let threshold = parse_threshold(&config.quality.threshold)?;
    let outcome = gate_bundles(
        &bundles,
        checker.as_ref(),
        judge.as_ref(),
        config.limits.judgments,
        threshold,
        config.quality.candidates_per_formalizer,
        config.seed,
    )?;
    let dir = config.run_dir.join("quality");
    corpus::write_records(&dir.join("selected.jsonl"), outcome.selected.iter())?;
    corpus::write_records(&dir.join("flagged.jsonl"), outcome.flagged.iter())?;
    write_json(&dir.join("report.json"), &outcome.report)?;
    std::fs::write(dir.join("report.txt"), outcome.report.render_table())?;
    Ok(())
}

fn stage_iterate(config: &PipelineConfig) -> Result<()> {
    let schedule_path = config
        .corpora
        .schedule
        .as_ref()
        .context("iterate stage requires corpora.schedule")?;
    let schedule = plan_schedule(schedule_path)?;
    let schedule_dir = schedule_path.parent().unwrap_or(Path::new("."));

    let mut sources: Vec<(String, FormalDataset)> = Vec::new();
    for (name, path) in &schedule.sources {
        let resolved = schedule_dir.join(path);
        let dataset = corpus::load_formal(&resolved)
            .with_context(|| format!("loading source `{name}` from {}", resolved.display()))?;
        sources.push((name.clone(), dataset));
    }
    let library: Option<Vec<LibraryEntry>> = match &schedule.library_corpus {
        Some(path) => Some(corpus::read_records(&schedule_dir.join(path))?),
        None => None,
    };

    let prover = config.backends.prover.build()?;
    let checker = build_checker(config)?;
    let state = StateDir::new(config.run_dir.join("iterate"));
    std::fs::create_dir_all(&state.root)?;
    state.write_source_manifests(&sources)?;

    // resume: reload the persisted solved set against the union of sources
    let mut all_statements = FormalDataset::new();
    for (_, dataset) in &sources {
        for stmt in dataset.iter() {
            all_statements.insert(stmt.clone());
        }
    }
    let mut solved = if state.solved_path().exists() {
        SolvedSet::load(&state.solved_path(), &all_statements)?
    } else {
        SolvedSet::new()
    };

    for iteration in &schedule.iterations {
        if state.report_path(iteration.k).exists() {
            tracing::info!(k = iteration.k, "iteration already complete; skipping");
            continue;
        }
        let ctx = IterationContext {
            sources: &sources,
            library_corpus: library.as_deref(),
            prover: prover.as_ref(),
            checker: checker.as_ref(),
            pool_size: config.limits.verify_pool,
            timeout: std::time::Duration::from_millis(config.limits.timeout_ms),
            producer_tag: format!("prover-iter-{}", iteration.k),
        };
        let outcome = run_iteration(iteration, &ctx, &solved)?;
        state.write_iteration(&outcome)?;
        tracing::info!(
            k = iteration.k,
            newly_solved = outcome.report.newly_solved_count,
            cumulative = outcome.report.cumulative_solved_count,
            "iteration complete"
        );
        solved = outcome.solved;
    }
    Ok(())
}

/// The attempts file driving eval and preference data: the configured one,
/// or the last iteration's output.
fn attempts_path(config: &PipelineConfig) -> Result<std::path::PathBuf> {
    if let Some(path) = &config.corpora.attempts {
        return Ok(path.clone());
    }
    let state = StateDir::new(config.run_dir.join("iterate"));
    let schedule_path = config
        .corpora
        .schedule
        .as_ref()
        .context("no corpora.attempts and no schedule to locate iterate output")?;
    let schedule = plan_schedule(schedule_path)?;
    let last = schedule
        .iterations
        .last()
        .context("schedule declares no iterations")?;
    let path = state.attempts_path(last.k);
    if !path.exists() {
        bail!(
            "attempts file {} not found (did the iterate stage run?)",
            path.display()
        );
    }
    Ok(path)
}

fn stage_eval(config: &PipelineConfig) -> Result<()> {
    let path = attempts_path(config)?;
    let sets = load_attempt_sets(&path)?;
    // the schedule may sample fewer proofs than the configured budget
    let available = sets.iter().map(|s| s.n()).min().unwrap_or(0);
    let n = config.eval.n.min(available.max(1));
    if n < config.eval.n {
        tracing::warn!(
            configured = config.eval.n,
            available,
            "eval.n exceeds available samples; clamping"
        );
    }
    let metrics = eval_attempts(
        sets,
        n,
        &config.eval.budgets,
        config.eval.bootstrap,
        config.seed,
    )?;
    let dir = config.run_dir.join("eval");
    write_json(&dir.join("metrics.json"), &metrics)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("curve.csv"), curve_csv(&metrics.curve))?;
    Ok(())
}

fn stage_prefdata(config: &PipelineConfig) -> Result<()> {
    let path = attempts_path(config)?;
    let records: Vec<crate::iterate::AttemptRecord> = corpus::read_records(&path)?;
    let groups = AttemptGroup::from_records(&records);
    let bucket = PassRatioBucket::parse(&config.prefdata.bucket)?;
    let sets: Vec<AttemptSet> = groups.iter().map(|g| g.attempt_set()).collect();
    let in_bucket: std::collections::BTreeSet<String> = bucket_statements(&sets, &bucket)
        .into_iter()
        .map(|s| s.statement_id.clone())
        .collect();
    let selected: Vec<AttemptGroup> = groups
        .iter()
        .filter(|g| in_bucket.contains(&g.statement_id))
        .cloned()
        .collect();
    let (pairs, skips) = build_dpo_pairs(&selected, config.prefdata.length_penalized, config.seed);
    let reward_config = RewardConfig::with_timeout_reward(config.prefdata.timeout_reward)?;
    let mut rewards = Vec::new();
    for group in &groups {
        rewards.extend(reward_records(&group.attempt_set(), &reward_config));
    }

    let dir = config.run_dir.join("prefdata");
    let pair_records: Vec<PairRecord> = pairs.iter().map(PairRecord::from).collect();
    corpus::write_records(&dir.join("pairs.jsonl"), pair_records.iter())?;
    corpus::write_records(&dir.join("skips.jsonl"), skips.iter())?;
    corpus::write_records(&dir.join("rewards.jsonl"), rewards.iter())?;
    Ok(())
}

fn stage_sketch(config: &PipelineConfig) -> Result<()> {
    let statements_path = config
        .corpora
        .sketch_statements
        .as_ref()
        .context("sketch stage requires corpora.sketch_statements")?;
    let proofs_path = config
        .corpora
        .sketch_proofs
        .as_ref()
        .context("sketch stage requires corpora.sketch_proofs")?;
    let statements = corpus::load_formal(statements_path)?;
    let proofs: Vec<ProofAttempt> = corpus::read_records(proofs_path)?;
    let mut proof_by_statement: BTreeMap<String, String> = BTreeMap::new();
    for attempt in proofs {
        proof_by_statement
            .entry(attempt.statement_id)
            .or_insert(attempt.proof_text);
    }
    let prover = config.backends.prover.build()?;
    let checker = build_checker(config)?;
    let simplifier = config.backends.simplifier.build()?;

    let mut reports = Vec::new();
    for statement in statements.iter() {
        let Some(proof) = proof_by_statement.get(&statement.id) else {
            tracing::warn!(statement = %statement.id, "no structured proof supplied; skipping");
            continue;
        };
        reports.push(run_sketch_pipeline(
            statement,
            proof,
            prover.as_ref(),
            checker.as_ref(),
            crate::sketch::DEFAULT_SUBPROBLEM_ATTEMPTS,
            config.seed,
        ));
    }
    let all: Vec<FormalStatement> = statements.iter().cloned().collect();
    let simplify = simplify_statements(&all, simplifier.as_ref());

    let dir = config.run_dir.join("sketch");
    corpus::write_records(&dir.join("results.jsonl"), reports.iter())?;
    corpus::write_records(&dir.join("simplify.jsonl"), simplify.iter())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_parsing_and_order() {
        assert_eq!(Stage::parse("eval").unwrap(), Stage::Eval);
        assert!(Stage::parse("nope").is_err());
        let mut stages = vec![Stage::Sketch, Stage::Quality, Stage::Eval];
        stages.sort();
        assert_eq!(stages, vec![Stage::Quality, Stage::Eval, Stage::Sketch]);
    }

    #[test]
    fn curve_csv_renders() {
        let csv = curve_csv(&[(1, 0.25), (4, 0.5)]);
        assert_eq!(csv, "budget,rate\n1,0.25\n4,0.5\n");
    }
}
