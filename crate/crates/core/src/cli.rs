//! The `proofmill` command line: verification batches, quality gating,
//! expert iteration, evaluation, preference data, sketch runs, and full
//! pipeline orchestration.
//!
//! Exit codes: 0 on success, 1 when a stage or batch fails, 2 for
//! configuration and usage errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{validate_config, JudgeConfig, ProverConfig, SimplifierConfig};
use crate::corpus::{self, ProofAttempt};
use crate::evaluate::{
    cross_dataset_correlation, load_attempt_sets, proof_style_report, RateMatrix,
};
use crate::iterate::{plan_schedule, run_iteration, IterationContext, LibraryEntry, StateDir};
use crate::pipeline::{self, eval_attempts, gate_bundles, BundleRecord, Stage};
use crate::prefdata::{
    bucket_statements, build_dpo_pairs, reward_records, AttemptGroup, PairRecord, PassRatioBucket,
    RewardConfig,
};
use crate::quality::parse_threshold;
use crate::sketch::run_sketch_pipeline;
use crate::verify::{
    verify_batch, CheckJob, CheckerBackendConfig, CheckerKind, JobResult, VerdictRecord,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STAGE_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Parser)]
#[command(
    name = "proofmill",
    version,
    about = "Data machinery for whole-proof provers"
)]
pub struct Cli {
    /// Pipeline config file (pipeline subcommands).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Default seed for subcommands that do not set their own.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Verify a batch of proofs against a checker backend.
    Verify(VerifyArgs),
    /// Formalization quality gates.
    #[command(subcommand)]
    Quality(QualityCommand),
    /// Expert iteration.
    #[command(subcommand)]
    Iterate(IterateCommand),
    /// Benchmark evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Preference-learning data construction.
    #[command(subcommand)]
    Prefdata(PrefdataCommand),
    /// Divide-and-conquer proof sketches.
    #[command(subcommand)]
    Sketch(SketchCommand),
    /// End-to-end pipeline runs.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Args)]
pub struct BackendArgs {
    /// Checker backend.
    #[arg(long, value_parser = ["toy", "external"], default_value = "toy")]
    pub backend: String,
    /// External checker executable.
    #[arg(long)]
    pub executable: Option<PathBuf>,
    /// Extra arguments passed to the external checker, comma-separated.
    #[arg(long)]
    pub checker_args: Option<String>,
    /// Scratch directory for external checker jobs.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Source file extension for external checker jobs.
    #[arg(long, default_value = "lean")]
    pub source_ext: String,
}

impl BackendArgs {
    fn checker_config(&self) -> CheckerBackendConfig {
        CheckerBackendConfig {
            kind: if self.backend == "external" {
                CheckerKind::External
            } else {
                CheckerKind::Toy
            },
            executable: self.executable.clone(),
            args: self
                .checker_args
                .as_deref()
                .map(|s| s.split(',').map(|a| a.trim().to_string()).collect())
                .unwrap_or_default(),
            workdir: self
                .workdir
                .clone()
                .or_else(|| Some(std::env::temp_dir().join("proofmill-scratch"))),
            source_ext: self.source_ext.clone(),
        }
    }
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Formal statements (JSONL).
    #[arg(long)]
    pub statements: PathBuf,
    /// Proof attempts to check (JSONL).
    #[arg(long)]
    pub proofs: PathBuf,
    /// Worker pool size.
    #[arg(long, default_value_t = 4, value_parser = parse_pool_size)]
    pub pool: usize,
    /// Per-job timeout in milliseconds.
    #[arg(long, default_value_t = crate::verify::DEFAULT_TIMEOUT_MS, value_parser = clap::value_parser!(u64).range(1..))]
    pub timeout_ms: u64,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Verdict export path (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write joined attempt records (proof text + status) here.
    #[arg(long)]
    pub attempts_out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum QualityCommand {
    /// Run CC and FC gates over candidate bundles and select statements.
    Gate(QualityGateArgs),
}

#[derive(Args)]
pub struct QualityGateArgs {
    /// Candidate bundles (JSONL: informal_id, informal_text, candidates).
    #[arg(long)]
    pub bundles: PathBuf,
    /// Judgments per candidate.
    #[arg(long, default_value_t = crate::quality::DEFAULT_JUDGMENTS)]
    pub judgments: u32,
    /// Score threshold; scores below it are filtered out.
    #[arg(long, default_value = "0.5")]
    pub threshold: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Selected statements output (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Gate statistics output (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// Judge backend: mock, scripted:<path>, or http:<url>.
    #[arg(long, default_value = "mock")]
    pub judge: String,
    /// pass@k column of the report.
    #[arg(long, default_value_t = 8)]
    pub candidates_per_formalizer: usize,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Subcommand)]
pub enum IterateCommand {
    /// Run the scheduled expert-iteration rounds.
    Run(IterateRunArgs),
}

#[derive(Args)]
pub struct IterateRunArgs {
    /// Iteration schedule (TOML).
    #[arg(long)]
    pub schedule: PathBuf,
    /// Prover backend: mock or http:<url>.
    #[arg(long, default_value = "mock")]
    pub prover: String,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// State directory holding the cumulative solved set and reports.
    #[arg(long)]
    pub state_dir: PathBuf,
    /// Verification pool size.
    #[arg(long, default_value_t = 4, value_parser = parse_pool_size)]
    pub pool: usize,
    /// Per-job timeout in milliseconds.
    #[arg(long, default_value_t = crate::verify::DEFAULT_TIMEOUT_MS, value_parser = clap::value_parser!(u64).range(1..))]
    pub timeout_ms: u64,
}

#[derive(Subcommand)]
pub enum EvalCommand {
    /// pass@N with bootstrap uncertainty and a scaling curve.
    Pass(EvalPassArgs),
    /// Proof-style statistics (length and try counts).
    Stats(EvalStatsArgs),
    /// Cross-dataset correlation of run rates.
    Corr(EvalCorrArgs),
}

#[derive(Args)]
pub struct EvalPassArgs {
    /// Attempt or verdict records (JSONL).
    #[arg(long)]
    pub run: PathBuf,
    /// Sampling budget N.
    #[arg(long)]
    pub n: usize,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scaling-curve budgets, comma-separated (defaults to powers of two up to N).
    #[arg(long)]
    pub budgets: Option<String>,
    /// Metrics output (JSON; stdout summary always printed).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plot-ready CSV of (budget, rate) pairs.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Benchmark name; when set, the run's statement count is validated
    /// against the registry.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Benchmark registry file (TOML) extending the builtin split sizes.
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalStatsArgs {
    /// Records bearing a proof_text field (JSONL).
    #[arg(long)]
    pub proofs: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalCorrArgs {
    /// Rate files (JSON: run, rates) — a path or glob like `runs/*.json`.
    #[arg(long)]
    pub runs: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum PrefdataCommand {
    /// Build chosen/rejected preference pairs.
    Dpo(PrefdataDpoArgs),
    /// Assign per-sample rewards.
    Rewards(PrefdataRewardsArgs),
}

#[derive(Args)]
pub struct PrefdataDpoArgs {
    /// Attempt records (JSONL).
    #[arg(long)]
    pub attempts: PathBuf,
    /// Pass-ratio bucket `lower,upper` (exclusive lower, inclusive upper).
    #[arg(long, default_value = "0,0.25")]
    pub bucket: String,
    /// Choose the shortest passing proof instead of sampling one.
    #[arg(long)]
    pub length_penalized: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pair output (JSONL); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PrefdataRewardsArgs {
    /// Attempt records (JSONL).
    #[arg(long)]
    pub attempts: PathBuf,
    /// Reward for timeout samples (0, -8, or -16).
    #[arg(long, default_value_t = crate::prefdata::DEFAULT_TIMEOUT_REWARD, allow_hyphen_values = true)]
    pub timeout_reward: i32,
    /// Reward output (JSONL); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum SketchCommand {
    /// Decompose structured proofs, solve subgoals, and reassemble.
    Run(SketchRunArgs),
    /// Extract goal equations and query the simplifier backend.
    Simplify(SketchSimplifyArgs),
}

#[derive(Args)]
pub struct SketchRunArgs {
    /// Formal statements (JSONL).
    #[arg(long)]
    pub statement: PathBuf,
    /// Structured proofs for those statements (JSONL proof attempts).
    #[arg(long)]
    pub proof: PathBuf,
    /// Prover backend: mock or http:<url>.
    #[arg(long, default_value = "mock")]
    pub prover: String,
    /// Prover samples per subproblem.
    #[arg(long, default_value_t = crate::sketch::DEFAULT_SUBPROBLEM_ATTEMPTS)]
    pub attempts: u32,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result records (JSONL); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SketchSimplifyArgs {
    /// Formal statements (JSONL).
    #[arg(long)]
    pub statements: PathBuf,
    /// Simplifier backend: mock or http:<url>.
    #[arg(long, default_value = "mock")]
    pub simplifier: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum PipelineCommand {
    /// Validate a pipeline config, reporting every violation.
    Validate,
    /// Run pipeline stages under the configured run directory.
    Run(PipelineRunArgs),
}

#[derive(Args)]
pub struct PipelineRunArgs {
    /// Comma-separated stage subset (default: all stages).
    #[arg(long)]
    pub stages: Option<String>,
}

/// Entry point: parse arguments, dispatch, map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    init_tracing(&cli.log_level);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_STAGE_FAILURE
        }
    }
}

fn init_tracing(level: &str) {
    use tracing_subscriber::EnvFilter;
    let filter = EnvFilter::try_new(level).unwrap_or_else(|_| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Quality(QualityCommand::Gate(args)) => cmd_quality_gate(args, cli.seed),
        Command::Iterate(IterateCommand::Run(args)) => cmd_iterate_run(args, cli.seed),
        Command::Eval(EvalCommand::Pass(args)) => cmd_eval_pass(args, cli.seed),
        Command::Eval(EvalCommand::Stats(args)) => cmd_eval_stats(args),
        Command::Eval(EvalCommand::Corr(args)) => cmd_eval_corr(args),
        Command::Prefdata(PrefdataCommand::Dpo(args)) => cmd_prefdata_dpo(args, cli.seed),
        Command::Prefdata(PrefdataCommand::Rewards(args)) => cmd_prefdata_rewards(args),
        Command::Sketch(SketchCommand::Run(args)) => cmd_sketch_run(args, cli.seed),
        Command::Sketch(SketchCommand::Simplify(args)) => cmd_sketch_simplify(args),
        Command::Pipeline(sub) => cmd_pipeline(sub, cli),
    }
}

fn parse_pool_size(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v == 0 {
        return Err("pool size must be at least 1".to_string());
    }
    Ok(v)
}

fn make_fs_safe(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '#') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn write_or_print<T: serde::Serialize>(out: Option<&Path>, records: &[T]) -> Result<()> {
    match out {
        Some(path) => {
            corpus::write_records(path, records.iter())?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for record in records {
                use std::io::Write;
                writeln!(lock, "{}", serde_json::to_string(record)?)?;
            }
            Ok(())
        }
    }
}

fn parse_prover(spec: &str) -> ProverConfig {
    match spec.strip_prefix("http:") {
        Some(url) => ProverConfig {
            kind: "http".into(),
            endpoint: Some(format!("http:{url}")),
        },
        None => ProverConfig {
            kind: spec.to_string(),
            endpoint: None,
        },
    }
}

fn parse_judge(spec: &str) -> JudgeConfig {
    if let Some(url) = spec.strip_prefix("http:") {
        JudgeConfig {
            kind: "http".into(),
            endpoint: Some(format!("http:{url}")),
            script: None,
            default_response: "Appropriate".into(),
        }
    } else if let Some(path) = spec.strip_prefix("scripted:") {
        JudgeConfig {
            kind: "scripted".into(),
            endpoint: None,
            script: Some(PathBuf::from(path)),
            default_response: "Appropriate".into(),
        }
    } else {
        JudgeConfig {
            kind: spec.to_string(),
            endpoint: None,
            script: None,
            default_response: "Appropriate".into(),
        }
    }
}

fn parse_simplifier(spec: &str) -> SimplifierConfig {
    match spec.strip_prefix("http:") {
        Some(url) => SimplifierConfig {
            kind: "http".into(),
            endpoint: Some(format!("http:{url}")),
        },
        None => SimplifierConfig {
            kind: spec.to_string(),
            endpoint: None,
        },
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let statements = corpus::load_formal(&args.statements)?;
    let proofs: Vec<ProofAttempt> = corpus::read_records(&args.proofs)?;
    let checker = args.backend.checker_config().build()?;
    if let Some(dir) = &args.backend.checker_config().workdir {
        if args.backend.backend == "external" {
            std::fs::create_dir_all(dir)?;
        }
    }

    let mut jobs = Vec::with_capacity(proofs.len());
    let mut meta: BTreeMap<String, &ProofAttempt> = BTreeMap::new();
    for attempt in &proofs {
        let statement = statements.get(&attempt.statement_id).with_context(|| {
            format!(
                "proof references unknown statement `{}`",
                attempt.statement_id
            )
        })?;
        let mut job_id = make_fs_safe(&format!(
            "{}#{}",
            attempt.statement_id, attempt.sample_index
        ));
        while meta.contains_key(&job_id) {
            job_id.push('x');
        }
        meta.insert(job_id.clone(), attempt);
        jobs.push(
            CheckJob::new(job_id, statement.clone(), attempt.proof_text.clone())
                .with_timeout(Duration::from_millis(args.timeout_ms)),
        );
    }
    let results = verify_batch(jobs, checker.as_ref(), args.pool)?;

    let mut verdicts = Vec::with_capacity(results.len());
    let mut attempts_out = Vec::new();
    let mut passed = 0usize;
    let mut failed = 0usize;
    let mut timed_out = 0usize;
    let mut errored = 0usize;
    for (job_id, outcome) in &results {
        let attempt = meta[job_id];
        verdicts.push(VerdictRecord::from_outcome(
            job_id,
            outcome,
            Some(attempt.sample_index),
        ));
        match &outcome.result {
            JobResult::Verdict(v) => {
                match v.status {
                    crate::verify::VerdictStatus::Pass => passed += 1,
                    crate::verify::VerdictStatus::Fail => failed += 1,
                    crate::verify::VerdictStatus::Timeout => timed_out += 1,
                }
                attempts_out.push(crate::iterate::AttemptRecord::new(attempt, v));
            }
            JobResult::InfraError { .. } => errored += 1,
        }
    }
    corpus::write_records(&args.out, verdicts.iter())?;
    if let Some(path) = &args.attempts_out {
        attempts_out.sort_by(|a: &crate::iterate::AttemptRecord, b| {
            (&a.statement_id, a.sample_index).cmp(&(&b.statement_id, b.sample_index))
        });
        corpus::write_records(path, attempts_out.iter())?;
    }
    println!(
        "verified {} jobs: {passed} pass, {failed} fail, {timed_out} timeout, {errored} error",
        results.len()
    );
    Ok(if errored > 0 {
        EXIT_STAGE_FAILURE
    } else {
        EXIT_OK
    })
}

fn cmd_quality_gate(args: &QualityGateArgs, global_seed: u64) -> Result<i32> {
    let seed = args.seed.unwrap_or(global_seed);
    let bundles: Vec<BundleRecord> = corpus::read_records(&args.bundles)?;
    let checker = args.backend.checker_config().build()?;
    let judge = parse_judge(&args.judge).build()?;
    let threshold = parse_threshold(&args.threshold)?;
    let outcome = gate_bundles(
        &bundles,
        checker.as_ref(),
        judge.as_ref(),
        args.judgments,
        threshold,
        args.candidates_per_formalizer,
        seed,
    )?;
    corpus::write_records(&args.out, outcome.selected.iter())?;
    let report_json = serde_json::to_string_pretty(&outcome.report)?;
    if let Some(parent) = args.report.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.report, report_json)?;
    print!("{}", outcome.report.render_table());
    println!(
        "selected {} statements from {} bundles ({} flagged judgments)",
        outcome.selected.len(),
        bundles.len(),
        outcome.flagged.len()
    );
    Ok(EXIT_OK)
}

fn cmd_iterate_run(args: &IterateRunArgs, _global_seed: u64) -> Result<i32> {
    let schedule = plan_schedule(&args.schedule)?;
    if schedule.iterations.is_empty() {
        println!("schedule declares no iterations; nothing to do");
        return Ok(EXIT_OK);
    }
    let schedule_dir = args.schedule.parent().unwrap_or(Path::new("."));
    let mut sources = Vec::new();
    let mut all_statements = corpus::FormalDataset::new();
    for (name, path) in &schedule.sources {
        let dataset = corpus::load_formal(&schedule_dir.join(path))
            .with_context(|| format!("loading source `{name}`"))?;
        for stmt in dataset.iter() {
            all_statements.insert(stmt.clone());
        }
        sources.push((name.clone(), dataset));
    }
    let library: Option<Vec<LibraryEntry>> = match &schedule.library_corpus {
        Some(path) => Some(corpus::read_records(&schedule_dir.join(path))?),
        None => None,
    };
    let prover = parse_prover(&args.prover).build()?;
    let checker = args.backend.checker_config().build()?;

    let state = StateDir::new(&args.state_dir);
    std::fs::create_dir_all(&state.root)?;
    state.write_source_manifests(&sources)?;
    let mut solved = if state.solved_path().exists() {
        corpus::SolvedSet::load(&state.solved_path(), &all_statements)?
    } else {
        corpus::SolvedSet::new()
    };

    println!(
        "{:>5} {:>10} {:>12} {:>12} {:>10}",
        "k", "attempted", "newly", "cumulative", "ms"
    );
    for iteration in &schedule.iterations {
        if state.report_path(iteration.k).exists() {
            println!("{:>5} (already complete, skipped)", iteration.k);
            continue;
        }
        // schedule seeds are explicit and authoritative
        let config = iteration.clone();
        let ctx = IterationContext {
            sources: &sources,
            library_corpus: library.as_deref(),
            prover: prover.as_ref(),
            checker: checker.as_ref(),
            pool_size: args.pool,
            timeout: Duration::from_millis(args.timeout_ms),
            producer_tag: format!("prover-iter-{}", config.k),
        };
        let outcome = run_iteration(&config, &ctx, &solved)?;
        state.write_iteration(&outcome)?;
        println!(
            "{:>5} {:>10} {:>12} {:>12} {:>10}",
            outcome.report.k,
            outcome.report.statements_attempted,
            outcome.report.newly_solved_count,
            outcome.report.cumulative_solved_count,
            outcome.report.wall_time_ms
        );
        solved = outcome.solved;
    }
    println!(
        "solved set: {} statements -> {}",
        solved.len(),
        state.solved_path().display()
    );
    Ok(EXIT_OK)
}

fn cmd_eval_pass(args: &EvalPassArgs, global_seed: u64) -> Result<i32> {
    let seed = args.seed.unwrap_or(global_seed);
    let sets = load_attempt_sets(&args.run)?;
    if let Some(name) = &args.benchmark {
        let mut registry = crate::evaluate::BenchmarkRegistry::builtin();
        if let Some(path) = &args.registry {
            let extra = crate::evaluate::BenchmarkRegistry::load(path)
                .with_context(|| format!("loading registry {}", path.display()))?;
            registry.benchmarks.extend(extra.benchmarks);
        }
        let benchmark: crate::evaluate::BenchmarkName = name.clone().into();
        match registry.expected_size(&benchmark) {
            Some(expected) if expected != sets.len() => {
                bail!(
                    "benchmark `{name}` expects {expected} statements, run has {}",
                    sets.len()
                );
            }
            None => bail!("benchmark `{name}` is not in the registry"),
            _ => {}
        }
    }
    let budgets: Vec<usize> = match &args.budgets {
        Some(spec) => spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| anyhow::anyhow!("bad budget `{s}`: {e}"))
            })
            .collect::<Result<_>>()?,
        None => {
            let mut budgets = Vec::new();
            let mut b = 1;
            while b <= args.n {
                budgets.push(b);
                b *= 2;
            }
            if budgets.last() != Some(&args.n) {
                budgets.push(args.n);
            }
            budgets
        }
    };
    let metrics = eval_attempts(sets, args.n, &budgets, args.bootstrap, seed)?;
    println!(
        "pass@{}: {:.4} (bootstrap mean {:.4} +/- {:.4}, {} replicates, {} statements)",
        metrics.n,
        metrics.pass_at_n,
        metrics.bootstrap_mean,
        metrics.bootstrap_std,
        metrics.bootstrap_replicates,
        metrics.statements
    );
    for (budget, rate) in &metrics.curve {
        println!("  pass@{budget:<6} {rate:.4}");
    }
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&metrics)?)?;
    }
    if let Some(path) = &args.curve {
        std::fs::write(path, pipeline::curve_csv(&metrics.curve))?;
    }
    Ok(EXIT_OK)
}

fn cmd_eval_stats(args: &EvalStatsArgs) -> Result<i32> {
    #[derive(serde::Deserialize)]
    struct ProofRow {
        proof_text: String,
    }
    let rows: Vec<ProofRow> = corpus::read_records(&args.proofs)?;
    let proofs: Vec<String> = rows.into_iter().map(|r| r.proof_text).collect();
    let report = proof_style_report(&proofs);
    println!(
        "proofs: {}  avg length: {:.2}  avg try count: {:.2}{}",
        report.count,
        report.avg_length,
        report.avg_try_count,
        if report.empty { "  (empty input)" } else { "" }
    );
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(EXIT_OK)
}

/// Expand a `dir/prefix*suffix.json`-style pattern; a plain path passes through.
fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(pattern);
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .with_context(|| format!("bad pattern `{pattern}`"))?;
    if !name.contains('*') {
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let pieces: Vec<&str> = name.split('*').collect();
    let matches_pattern = |candidate: &str| -> bool {
        let mut rest = candidate;
        if let Some(first) = pieces.first() {
            match rest.strip_prefix(first) {
                Some(r) => rest = r,
                None => return false,
            }
        }
        for piece in &pieces[1..pieces.len().saturating_sub(1)] {
            match rest.find(piece) {
                Some(idx) => rest = &rest[idx + piece.len()..],
                None => return false,
            }
        }
        match pieces.last() {
            Some(last) if pieces.len() > 1 => rest.ends_with(last),
            _ => true,
        }
    };
    let mut found = Vec::new();
    for entry in std::fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let file_name = entry.file_name();
        let Some(file_name) = file_name.to_str() else {
            continue;
        };
        if entry.file_type()?.is_file() && matches_pattern(file_name) {
            found.push(entry.path());
        }
    }
    found.sort();
    if found.is_empty() {
        bail!("pattern `{pattern}` matched no files");
    }
    Ok(found)
}

fn cmd_eval_corr(args: &EvalCorrArgs) -> Result<i32> {
    #[derive(serde::Deserialize)]
    struct RateFile {
        run: String,
        rates: BTreeMap<String, f64>,
    }
    let paths = expand_glob(&args.runs)?;
    let mut files = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path)?;
        let parsed: RateFile =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        files.push(parsed);
    }
    if files.is_empty() {
        bail!("no rate files loaded");
    }
    let benchmarks: Vec<String> = files[0].rates.keys().cloned().collect();
    for file in &files {
        let keys: Vec<String> = file.rates.keys().cloned().collect();
        if keys != benchmarks {
            bail!(
                "run `{}` covers different benchmarks than the first run",
                file.run
            );
        }
    }
    let matrix = RateMatrix {
        benchmarks: benchmarks.clone(),
        runs: files.iter().map(|f| f.run.clone()).collect(),
        rates: files
            .iter()
            .map(|f| benchmarks.iter().map(|b| f.rates[b]).collect())
            .collect(),
    };
    let corr = cross_dataset_correlation(&matrix)?;
    print!("{:<16}", "");
    for b in &corr.benchmarks {
        print!("{b:>14}");
    }
    println!();
    for (i, row_name) in corr.benchmarks.iter().enumerate() {
        print!("{row_name:<16}");
        for j in 0..corr.benchmarks.len() {
            print!("{:>14.6}", corr.values[i][j]);
        }
        println!();
    }
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&corr)?)?;
    }
    Ok(EXIT_OK)
}

fn load_groups(path: &Path) -> Result<Vec<AttemptGroup>> {
    let records: Vec<crate::iterate::AttemptRecord> = corpus::read_records(path)?;
    Ok(AttemptGroup::from_records(&records))
}

fn cmd_prefdata_dpo(args: &PrefdataDpoArgs, global_seed: u64) -> Result<i32> {
    let seed = args.seed.unwrap_or(global_seed);
    let groups = load_groups(&args.attempts)?;
    let bucket = PassRatioBucket::parse(&args.bucket)?;
    let sets: Vec<crate::evaluate::AttemptSet> = groups.iter().map(|g| g.attempt_set()).collect();
    let in_bucket: std::collections::BTreeSet<String> = bucket_statements(&sets, &bucket)
        .into_iter()
        .map(|s| s.statement_id.clone())
        .collect();
    let selected: Vec<AttemptGroup> = groups
        .into_iter()
        .filter(|g| in_bucket.contains(&g.statement_id))
        .collect();
    let (pairs, skips) = build_dpo_pairs(&selected, args.length_penalized, seed);
    let records: Vec<PairRecord> = pairs.iter().map(PairRecord::from).collect();
    write_or_print(args.out.as_deref(), &records)?;
    eprintln!(
        "built {} pairs from {} bucketed statements ({} skipped)",
        records.len(),
        selected.len(),
        skips.len()
    );
    Ok(EXIT_OK)
}

fn cmd_prefdata_rewards(args: &PrefdataRewardsArgs) -> Result<i32> {
    let groups = load_groups(&args.attempts)?;
    let config = RewardConfig::with_timeout_reward(args.timeout_reward)?;
    let mut records = Vec::new();
    for group in &groups {
        records.extend(reward_records(&group.attempt_set(), &config));
    }
    write_or_print(args.out.as_deref(), &records)?;
    eprintln!(
        "assigned rewards for {} samples across {} statements",
        records.len(),
        groups.len()
    );
    Ok(EXIT_OK)
}

fn cmd_sketch_run(args: &SketchRunArgs, global_seed: u64) -> Result<i32> {
    let seed = args.seed.unwrap_or(global_seed);
    let statements = corpus::load_formal(&args.statement)?;
    let proofs: Vec<ProofAttempt> = corpus::read_records(&args.proof)?;
    let mut proof_by_statement: BTreeMap<String, String> = BTreeMap::new();
    for attempt in proofs {
        proof_by_statement
            .entry(attempt.statement_id)
            .or_insert(attempt.proof_text);
    }
    let prover = parse_prover(&args.prover).build()?;
    let checker = args.backend.checker_config().build()?;
    let mut reports = Vec::new();
    let mut solved = 0usize;
    for statement in statements.iter() {
        let Some(proof) = proof_by_statement.get(&statement.id) else {
            bail!("no proof supplied for statement `{}`", statement.id);
        };
        let report = run_sketch_pipeline(
            statement,
            proof,
            prover.as_ref(),
            checker.as_ref(),
            args.attempts,
            seed,
        );
        if report.status == crate::sketch::SketchStatus::Solved {
            solved += 1;
        }
        reports.push(report);
    }
    write_or_print(args.out.as_deref(), &reports)?;
    eprintln!(
        "sketch pipeline solved {solved} of {} statements",
        reports.len()
    );
    Ok(EXIT_OK)
}

fn cmd_sketch_simplify(args: &SketchSimplifyArgs) -> Result<i32> {
    let statements = corpus::load_formal(&args.statements)?;
    let simplifier = parse_simplifier(&args.simplifier).build()?;
    let all: Vec<corpus::FormalStatement> = statements.iter().cloned().collect();
    let outcomes = crate::sketch::simplify_statements(&all, simplifier.as_ref());
    let closable = outcomes.iter().filter(|o| o.closable).count();
    write_or_print(args.out.as_deref(), &outcomes)?;
    eprintln!(
        "{closable} of {} statements are trivially closable",
        outcomes.len()
    );
    Ok(EXIT_OK)
}

fn cmd_pipeline(sub: &PipelineCommand, cli: &Cli) -> Result<i32> {
    let config_path = cli
        .config
        .as_ref()
        .context("pipeline commands require --config <path>")?;
    match sub {
        PipelineCommand::Validate => match validate_config(config_path) {
            Ok((config, warnings)) => {
                for warning in &warnings {
                    eprintln!("warning: {warning}");
                }
                println!(
                    "config ok: run_dir = {}, seed = {}",
                    config.run_dir.display(),
                    config.seed
                );
                Ok(EXIT_OK)
            }
            Err(report) => {
                eprint!("{report}");
                Ok(EXIT_CONFIG_ERROR)
            }
        },
        PipelineCommand::Run(args) => {
            let (config, warnings) = match validate_config(config_path) {
                Ok(pair) => pair,
                Err(report) => {
                    eprint!("{report}");
                    return Ok(EXIT_CONFIG_ERROR);
                }
            };
            for warning in &warnings {
                eprintln!("warning: {warning}");
            }
            let stages: Vec<Stage> = match &args.stages {
                None => Stage::ALL.to_vec(),
                Some(spec) => {
                    let mut stages = spec
                        .split(',')
                        .map(Stage::parse)
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    stages.sort();
                    stages.dedup();
                    stages
                }
            };
            let summary = pipeline::run_pipeline(&config, &stages)?;
            for (stage, status) in &summary.statuses {
                match status {
                    pipeline::StageStatus::Completed => println!("{stage}: completed"),
                    pipeline::StageStatus::Failed { error } => {
                        println!("{stage}: FAILED ({error})")
                    }
                    pipeline::StageStatus::Skipped { dependency } => {
                        println!("{stage}: skipped (needs {dependency})")
                    }
                }
            }
            println!("run directory: {}", config.run_dir.display());
            Ok(if summary.all_completed() {
                EXIT_OK
            } else {
                EXIT_STAGE_FAILURE
            })
        }
    }
}
