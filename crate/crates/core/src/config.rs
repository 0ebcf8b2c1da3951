//! Pipeline configuration: a single TOML file declaring corpora paths,
//! backend endpoints, pool sizes, timeouts, and seeds. Validation resolves
//! every path and reports the full list of violations, not just the first;
//! unknown keys are warnings. Environment variables may override backend
//! endpoints only (`PROOFMILL_PROVER_ENDPOINT`, `PROOFMILL_JUDGE_ENDPOINT`,
//! `PROOFMILL_SIMPLIFIER_ENDPOINT`); all other state comes from the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::prover::{EvalProver, HttpProver, ProverBackend};
use crate::quality::{HttpJudge, JudgeBackend, ScriptedJudge};
use crate::sketch::{
    HttpSimplifier, ScriptedSimplifier, SimplifierBackend, SimplifyRequest, SimplifyResponse,
};
use crate::verify::{CheckerBackendConfig, CheckerKind};

pub const ENV_PROVER_ENDPOINT: &str = "PROOFMILL_PROVER_ENDPOINT";
pub const ENV_JUDGE_ENDPOINT: &str = "PROOFMILL_JUDGE_ENDPOINT";
pub const ENV_SIMPLIFIER_ENDPOINT: &str = "PROOFMILL_SIMPLIFIER_ENDPOINT";

/// Validation outcome when the config is unusable: every violation found,
/// plus any warnings gathered along the way.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConfigReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl std::fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigReport {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorporaConfig {
    pub bundles: Option<PathBuf>,
    pub schedule: Option<PathBuf>,
    pub attempts: Option<PathBuf>,
    pub sketch_statements: Option<PathBuf>,
    pub sketch_proofs: Option<PathBuf>,
    pub benchmarks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProverConfig {
    pub kind: String,
    pub endpoint: Option<String>,
}

impl ProverConfig {
    pub fn build(&self) -> Result<Box<dyn ProverBackend>, BackendError> {
        match self.kind.as_str() {
            "mock" => Ok(Box::new(EvalProver)),
            "http" => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    BackendError::Config("http prover requires an endpoint".into())
                })?;
                Ok(Box::new(HttpProver::new(endpoint)))
            }
            other => Err(BackendError::Config(format!(
                "unknown prover kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub kind: String,
    pub endpoint: Option<String>,
    pub script: Option<PathBuf>,
    pub default_response: String,
}

/// One scripted-judge entry: responses replayed for a given formal text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeScriptRecord {
    pub formal_text: String,
    pub responses: Vec<String>,
}

impl JudgeConfig {
    pub fn build(&self) -> Result<Box<dyn JudgeBackend>, BackendError> {
        match self.kind.as_str() {
            "mock" => Ok(Box::new(ScriptedJudge::constant(&self.default_response))),
            "scripted" => {
                let path = self.script.clone().ok_or_else(|| {
                    BackendError::Config("scripted judge requires a script path".into())
                })?;
                let records: Vec<JudgeScriptRecord> = crate::corpus::read_records(&path)
                    .map_err(|e| BackendError::Config(format!("judge script: {e}")))?;
                Ok(Box::new(ScriptedJudge::new(
                    records.into_iter().map(|r| (r.formal_text, r.responses)),
                    &self.default_response,
                )))
            }
            "http" => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    BackendError::Config("http judge requires an endpoint".into())
                })?;
                Ok(Box::new(HttpJudge::new(endpoint)))
            }
            other => Err(BackendError::Config(format!(
                "unknown judge kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifierConfig {
    pub kind: String,
    pub endpoint: Option<String>,
}

/// The mock simplifier reduces a difference whose two sides are textually
/// identical (modulo whitespace) to `0`, and echoes everything else.
pub struct StructuralSimplifier;

impl SimplifierBackend for StructuralSimplifier {
    fn simplify(&self, req: &SimplifyRequest) -> Result<SimplifyResponse, BackendError> {
        let text = &req.difference_expression_text;
        let simplified = split_difference(text)
            .filter(|(a, b)| {
                crate::text::collapse_whitespace(a) == crate::text::collapse_whitespace(b)
            })
            .map(|_| "0".to_string())
            .unwrap_or_else(|| text.clone());
        Ok(SimplifyResponse {
            simplified_text: simplified,
        })
    }
}

/// Split `"(A) - (B)"` back into its sides.
fn split_difference(text: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    let bytes = text.as_bytes();
    for (idx, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'-' if depth == 0 => {
                fn strip(s: &str) -> Option<&str> {
                    s.strip_prefix('(')?.strip_suffix(')')
                }
                let lhs = text[..idx].trim();
                let rhs = text[idx + 1..].trim();
                return match (strip(lhs), strip(rhs)) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => None,
                };
            }
            _ => {}
        }
    }
    None
}

impl SimplifierConfig {
    pub fn build(&self) -> Result<Box<dyn SimplifierBackend>, BackendError> {
        match self.kind.as_str() {
            "mock" => Ok(Box::new(StructuralSimplifier)),
            "scripted" => Ok(Box::new(ScriptedSimplifier::new([]))),
            "http" => {
                let endpoint = self.endpoint.clone().ok_or_else(|| {
                    BackendError::Config("http simplifier requires an endpoint".into())
                })?;
                Ok(Box::new(HttpSimplifier::new(endpoint)))
            }
            other => Err(BackendError::Config(format!(
                "unknown simplifier kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendsConfig {
    pub checker: CheckerBackendConfig,
    pub prover: ProverConfig,
    pub judge: JudgeConfig,
    pub simplifier: SimplifierConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitsConfig {
    pub verify_pool: usize,
    pub timeout_ms: u64,
    pub judgments: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStageConfig {
    pub n: usize,
    pub budgets: Vec<usize>,
    pub bootstrap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefDataStageConfig {
    pub bucket: String,
    pub length_penalized: bool,
    pub timeout_reward: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityStageConfig {
    pub threshold: String,
    pub candidates_per_formalizer: usize,
}

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub run_dir: PathBuf,
    pub seed: u64,
    pub corpora: CorporaConfig,
    pub backends: BackendsConfig,
    pub limits: LimitsConfig,
    pub eval: EvalStageConfig,
    pub prefdata: PrefDataStageConfig,
    pub quality: QualityStageConfig,
    /// SHA-256 of the config file bytes, for run manifests.
    pub config_hash: String,
}

struct Walker<'a> {
    base: &'a Path,
    errors: Vec<String>,
    warnings: Vec<String>,
}

impl<'a> Walker<'a> {
    fn warn_unknown(&mut self, section: &str, table: &toml::Table, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                self.warnings.push(format!("unknown key `{section}{key}`"));
            }
        }
    }

    fn take_str(&mut self, table: &toml::Table, section: &str, key: &str) -> Option<String> {
        match table.get(key) {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(other) => {
                self.errors.push(format!(
                    "`{section}{key}` must be a string, got {}",
                    other.type_str()
                ));
                None
            }
        }
    }

    fn take_int(&mut self, table: &toml::Table, section: &str, key: &str) -> Option<i64> {
        match table.get(key) {
            None => None,
            Some(toml::Value::Integer(v)) => Some(*v),
            Some(other) => {
                self.errors.push(format!(
                    "`{section}{key}` must be an integer, got {}",
                    other.type_str()
                ));
                None
            }
        }
    }

    fn take_bool(&mut self, table: &toml::Table, section: &str, key: &str) -> Option<bool> {
        match table.get(key) {
            None => None,
            Some(toml::Value::Boolean(v)) => Some(*v),
            Some(other) => {
                self.errors.push(format!(
                    "`{section}{key}` must be a boolean, got {}",
                    other.type_str()
                ));
                None
            }
        }
    }

    /// A path that must exist at validation time.
    fn take_existing_path(
        &mut self,
        table: &toml::Table,
        section: &str,
        key: &str,
    ) -> Option<PathBuf> {
        let raw = self.take_str(table, section, key)?;
        let resolved = self.base.join(&raw);
        if !resolved.exists() {
            self.errors
                .push(format!("`{section}{key}`: path `{raw}` does not exist"));
            return None;
        }
        Some(resolved)
    }

    fn sub_table<'t>(
        &mut self,
        table: &'t toml::Table,
        section: &str,
        key: &str,
    ) -> Option<&'t toml::Table> {
        match table.get(key) {
            None => None,
            Some(toml::Value::Table(t)) => Some(t),
            Some(other) => {
                self.errors.push(format!(
                    "`{section}{key}` must be a table, got {}",
                    other.type_str()
                ));
                None
            }
        }
    }
}

/// Parse and fully validate a pipeline config file.
///
/// On success, all referenced paths have been resolved (relative to the
/// config file) and verified to exist, and warnings list any unknown keys.
/// On failure, the report carries every violation found.
pub fn validate_config(path: &Path) -> Result<(PipelineConfig, Vec<String>), ConfigReport> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            return Err(ConfigReport {
                errors: vec![format!("cannot read `{}`: {e}", path.display())],
                warnings: Vec::new(),
            });
        }
    };
    let text = String::from_utf8_lossy(&bytes);
    let root: toml::Table = match toml::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            return Err(ConfigReport {
                errors: vec![format!("config parse error: {e}")],
                warnings: Vec::new(),
            });
        }
    };
    let config_hash = {
        use sha2::Digest;
        let digest = sha2::Sha256::digest(&bytes);
        format!("{digest:x}")
    };
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut w = Walker {
        base: &base,
        errors: Vec::new(),
        warnings: Vec::new(),
    };

    w.warn_unknown(
        "",
        &root,
        &[
            "run_dir", "seed", "corpora", "backends", "limits", "eval", "prefdata", "quality",
        ],
    );

    let run_dir = match w.take_str(&root, "", "run_dir") {
        Some(s) => base.join(s),
        None => {
            w.errors.push("missing required key `run_dir`".to_string());
            PathBuf::new()
        }
    };
    let seed = match w.take_int(&root, "", "seed") {
        Some(s) if s >= 0 => s as u64,
        Some(s) => {
            w.errors
                .push(format!("`seed` must be non-negative, got {s}"));
            0
        }
        // explicit seeding is the contract: no wall-clock fallback
        None => {
            w.errors.push("missing required key `seed`".to_string());
            0
        }
    };

    let empty = toml::Table::new();
    let corpora_table = w.sub_table(&root, "", "corpora").unwrap_or(&empty);
    w.warn_unknown(
        "corpora.",
        corpora_table,
        &[
            "bundles",
            "schedule",
            "attempts",
            "sketch_statements",
            "sketch_proofs",
            "benchmarks",
        ],
    );
    let corpora = CorporaConfig {
        bundles: w.take_existing_path(corpora_table, "corpora.", "bundles"),
        schedule: w.take_existing_path(corpora_table, "corpora.", "schedule"),
        attempts: w.take_existing_path(corpora_table, "corpora.", "attempts"),
        sketch_statements: w.take_existing_path(corpora_table, "corpora.", "sketch_statements"),
        sketch_proofs: w.take_existing_path(corpora_table, "corpora.", "sketch_proofs"),
        benchmarks: w.take_existing_path(corpora_table, "corpora.", "benchmarks"),
    };

    let backends_table = w.sub_table(&root, "", "backends").unwrap_or(&empty);
    w.warn_unknown(
        "backends.",
        backends_table,
        &["checker", "prover", "judge", "simplifier"],
    );

    let checker_table = w
        .sub_table(backends_table, "backends.", "checker")
        .unwrap_or(&empty);
    w.warn_unknown(
        "backends.checker.",
        checker_table,
        &["kind", "executable", "args", "workdir", "source_ext"],
    );
    let checker_kind = match w
        .take_str(checker_table, "backends.checker.", "kind")
        .unwrap_or_else(|| "toy".to_string())
        .as_str()
    {
        "toy" | "toy_checker" => CheckerKind::Toy,
        "external" | "external_compiler" => CheckerKind::External,
        other => {
            w.errors.push(format!(
                "`backends.checker.kind` must be `toy` or `external`, got `{other}`"
            ));
            CheckerKind::Toy
        }
    };
    let checker_exe = w
        .take_str(checker_table, "backends.checker.", "executable")
        .map(|s| base.join(s));
    if checker_kind == CheckerKind::External {
        match &checker_exe {
            None => w
                .errors
                .push("`backends.checker.kind` = external requires `executable`".to_string()),
            Some(p) if !p.exists() => {
                w.errors.push(format!(
                    "`backends.checker.executable`: `{}` does not exist",
                    p.display()
                ));
            }
            _ => {}
        }
    }
    let checker_args = match checker_table.get("args") {
        None => Vec::new(),
        Some(toml::Value::Array(items)) => items
            .iter()
            .filter_map(|v| match v {
                toml::Value::String(s) => Some(s.clone()),
                other => {
                    w.errors.push(format!(
                        "`backends.checker.args` entries must be strings, got {}",
                        other.type_str()
                    ));
                    None
                }
            })
            .collect(),
        Some(other) => {
            w.errors.push(format!(
                "`backends.checker.args` must be an array, got {}",
                other.type_str()
            ));
            Vec::new()
        }
    };
    let checker = CheckerBackendConfig {
        kind: checker_kind,
        executable: checker_exe,
        args: checker_args,
        workdir: w
            .take_str(checker_table, "backends.checker.", "workdir")
            .map(|s| base.join(s)),
        source_ext: w
            .take_str(checker_table, "backends.checker.", "source_ext")
            .unwrap_or_else(|| "lean".to_string()),
    };

    let prover_table = w
        .sub_table(backends_table, "backends.", "prover")
        .unwrap_or(&empty);
    w.warn_unknown("backends.prover.", prover_table, &["kind", "endpoint"]);
    let mut prover = ProverConfig {
        kind: w
            .take_str(prover_table, "backends.prover.", "kind")
            .unwrap_or_else(|| "mock".into()),
        endpoint: w.take_str(prover_table, "backends.prover.", "endpoint"),
    };
    if let Ok(endpoint) = std::env::var(ENV_PROVER_ENDPOINT) {
        prover.endpoint = Some(endpoint);
    }
    if !["mock", "http"].contains(&prover.kind.as_str()) {
        w.errors.push(format!(
            "`backends.prover.kind` must be `mock` or `http`, got `{}`",
            prover.kind
        ));
    }
    if prover.kind == "http" && prover.endpoint.is_none() {
        w.errors
            .push("`backends.prover.kind` = http requires `endpoint`".to_string());
    }

    let judge_table = w
        .sub_table(backends_table, "backends.", "judge")
        .unwrap_or(&empty);
    w.warn_unknown(
        "backends.judge.",
        judge_table,
        &["kind", "endpoint", "script", "default_response"],
    );
    let mut judge = JudgeConfig {
        kind: w
            .take_str(judge_table, "backends.judge.", "kind")
            .unwrap_or_else(|| "mock".into()),
        endpoint: w.take_str(judge_table, "backends.judge.", "endpoint"),
        script: None,
        default_response: w
            .take_str(judge_table, "backends.judge.", "default_response")
            .unwrap_or_else(|| "Appropriate".into()),
    };
    if judge.kind == "scripted" {
        judge.script = w.take_existing_path(judge_table, "backends.judge.", "script");
        if judge.script.is_none() && !judge_table.contains_key("script") {
            w.errors
                .push("`backends.judge.kind` = scripted requires `script`".to_string());
        }
    }
    if let Ok(endpoint) = std::env::var(ENV_JUDGE_ENDPOINT) {
        judge.endpoint = Some(endpoint);
    }
    if !["mock", "scripted", "http"].contains(&judge.kind.as_str()) {
        w.errors.push(format!(
            "`backends.judge.kind` must be `mock`, `scripted`, or `http`, got `{}`",
            judge.kind
        ));
    }
    if judge.kind == "http" && judge.endpoint.is_none() {
        w.errors
            .push("`backends.judge.kind` = http requires `endpoint`".to_string());
    }

    let simplifier_table = w
        .sub_table(backends_table, "backends.", "simplifier")
        .unwrap_or(&empty);
    w.warn_unknown(
        "backends.simplifier.",
        simplifier_table,
        &["kind", "endpoint"],
    );
    let mut simplifier = SimplifierConfig {
        kind: w
            .take_str(simplifier_table, "backends.simplifier.", "kind")
            .unwrap_or_else(|| "mock".into()),
        endpoint: w.take_str(simplifier_table, "backends.simplifier.", "endpoint"),
    };
    if let Ok(endpoint) = std::env::var(ENV_SIMPLIFIER_ENDPOINT) {
        simplifier.endpoint = Some(endpoint);
    }
    if !["mock", "http"].contains(&simplifier.kind.as_str()) {
        w.errors.push(format!(
            "`backends.simplifier.kind` must be `mock` or `http`, got `{}`",
            simplifier.kind
        ));
    }
    if simplifier.kind == "http" && simplifier.endpoint.is_none() {
        w.errors
            .push("`backends.simplifier.kind` = http requires `endpoint`".to_string());
    }

    let limits_table = w.sub_table(&root, "", "limits").unwrap_or(&empty);
    w.warn_unknown(
        "limits.",
        limits_table,
        &["verify_pool", "timeout_ms", "judgments"],
    );
    let verify_pool = match w.take_int(limits_table, "limits.", "verify_pool") {
        Some(v) if v >= 1 => v as usize,
        Some(v) => {
            w.errors
                .push(format!("`limits.verify_pool` must be at least 1, got {v}"));
            1
        }
        None => 4,
    };
    let timeout_ms = match w.take_int(limits_table, "limits.", "timeout_ms") {
        Some(v) if v >= 1 => v as u64,
        Some(v) => {
            w.errors
                .push(format!("`limits.timeout_ms` must be positive, got {v}"));
            1
        }
        None => crate::verify::DEFAULT_TIMEOUT_MS,
    };
    let judgments = match w.take_int(limits_table, "limits.", "judgments") {
        Some(v) if v >= 1 => v as u32,
        Some(v) => {
            w.errors
                .push(format!("`limits.judgments` must be at least 1, got {v}"));
            1
        }
        None => crate::quality::DEFAULT_JUDGMENTS,
    };
    let limits = LimitsConfig {
        verify_pool,
        timeout_ms,
        judgments,
    };

    let eval_table = w.sub_table(&root, "", "eval").unwrap_or(&empty);
    w.warn_unknown("eval.", eval_table, &["n", "budgets", "bootstrap"]);
    let eval_n = match w.take_int(eval_table, "eval.", "n") {
        Some(v) if v >= 1 => v as usize,
        Some(v) => {
            w.errors
                .push(format!("`eval.n` must be at least 1, got {v}"));
            1
        }
        None => 16,
    };
    let budgets: Vec<usize> = match eval_table.get("budgets") {
        None => vec![1, 2, 4, 8, 16]
            .into_iter()
            .filter(|&b| b <= eval_n)
            .collect(),
        Some(toml::Value::Array(items)) => {
            let mut budgets = Vec::new();
            for item in items {
                match item {
                    toml::Value::Integer(v) if *v >= 1 => budgets.push(*v as usize),
                    other => w.errors.push(format!(
                        "`eval.budgets` entries must be positive integers, got {other}"
                    )),
                }
            }
            if budgets.windows(2).any(|p| p[0] >= p[1]) {
                w.errors
                    .push("`eval.budgets` must be strictly ascending".to_string());
            }
            budgets
        }
        Some(other) => {
            w.errors.push(format!(
                "`eval.budgets` must be an array, got {}",
                other.type_str()
            ));
            Vec::new()
        }
    };
    let bootstrap = match w.take_int(eval_table, "eval.", "bootstrap") {
        Some(v) if v >= 2 => v as u32,
        Some(v) => {
            w.errors
                .push(format!("`eval.bootstrap` must be at least 2, got {v}"));
            2
        }
        None => 1000,
    };
    let eval = EvalStageConfig {
        n: eval_n,
        budgets,
        bootstrap,
    };

    let prefdata_table = w.sub_table(&root, "", "prefdata").unwrap_or(&empty);
    w.warn_unknown(
        "prefdata.",
        prefdata_table,
        &["bucket", "length_penalized", "timeout_reward"],
    );
    let bucket = w
        .take_str(prefdata_table, "prefdata.", "bucket")
        .unwrap_or_else(|| "0,0.25".to_string());
    if let Err(e) = crate::prefdata::PassRatioBucket::parse(&bucket) {
        w.errors.push(format!("`prefdata.bucket`: {e}"));
    }
    let timeout_reward = match w.take_int(prefdata_table, "prefdata.", "timeout_reward") {
        Some(v) => {
            if ![0, -8, -16].contains(&(v as i32)) {
                w.errors.push(format!(
                    "`prefdata.timeout_reward` must be 0, -8, or -16, got {v}"
                ));
            }
            v as i32
        }
        None => crate::prefdata::DEFAULT_TIMEOUT_REWARD,
    };
    let prefdata = PrefDataStageConfig {
        bucket,
        length_penalized: w
            .take_bool(prefdata_table, "prefdata.", "length_penalized")
            .unwrap_or(false),
        timeout_reward,
    };

    let quality_table = w.sub_table(&root, "", "quality").unwrap_or(&empty);
    w.warn_unknown(
        "quality.",
        quality_table,
        &["threshold", "candidates_per_formalizer"],
    );
    let threshold = w
        .take_str(quality_table, "quality.", "threshold")
        .unwrap_or_else(|| "0.5".to_string());
    if let Err(e) = crate::quality::parse_threshold(&threshold) {
        w.errors.push(format!("`quality.threshold`: {e}"));
    }
    let candidates_per_formalizer =
        match w.take_int(quality_table, "quality.", "candidates_per_formalizer") {
            Some(v) if v >= 1 => v as usize,
            Some(v) => {
                w.errors.push(format!(
                    "`quality.candidates_per_formalizer` must be at least 1, got {v}"
                ));
                1
            }
            None => 8,
        };
    let quality = QualityStageConfig {
        threshold,
        candidates_per_formalizer,
    };

    let warnings = w.warnings.clone();
    for warning in &warnings {
        tracing::warn!("{warning}");
    }
    if !w.errors.is_empty() {
        return Err(ConfigReport {
            errors: w.errors,
            warnings,
        });
    }
    Ok((
        PipelineConfig {
            run_dir,
            seed,
            corpora,
            backends: BackendsConfig {
                checker,
                prover,
                judge,
                simplifier,
            },
            limits,
            eval,
            prefdata,
            quality,
            config_hash,
        },
        warnings,
    ))
}

/// Build the checker described by the config, defaulting the external
/// checker's scratch directory into the run directory.
pub fn build_checker(
    config: &PipelineConfig,
) -> Result<Box<dyn crate::verify::CheckerBackend>, BackendError> {
    let mut checker = config.backends.checker.clone();
    if checker.kind == CheckerKind::External && checker.workdir.is_none() {
        checker.workdir = Some(config.run_dir.join("scratch"));
        if let Some(dir) = &checker.workdir {
            std::fs::create_dir_all(dir)?;
        }
    }
    checker.build()
}

/// Stage versions recorded in run manifests.
pub fn stage_versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION");
    ["quality", "iterate", "eval", "prefdata", "sketch"]
        .iter()
        .map(|s| (s.to_string(), format!("{s}/{v}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("pipeline.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_valid_config_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), "run_dir = \"out\"\nseed = 7\n");
        let (config, warnings) = validate_config(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert!(config.run_dir.ends_with("out"));
        assert!(warnings.is_empty());
        assert_eq!(config.limits.verify_pool, 4);
        assert_eq!(config.backends.prover.kind, "mock");
        assert_eq!(config.config_hash.len(), 64);
    }

    #[test]
    fn missing_endpoint_is_a_single_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "run_dir = \"out\"\nseed = 1\n\n[backends.prover]\nkind = \"http\"\n",
        );
        let report = validate_config(&path).unwrap_err();
        assert_eq!(report.errors.len(), 1);
        assert!(report.errors[0].contains("endpoint"));
    }

    #[test]
    fn three_independent_errors_all_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            concat!(
                "run_dir = \"out\"\nseed = 1\n\n",
                "[corpora]\nbundles = \"missing.jsonl\"\n\n",
                "[backends.prover]\nkind = \"http\"\n\n",
                "[limits]\nverify_pool = 0\n",
            ),
        );
        let report = validate_config(&path).unwrap_err();
        assert_eq!(report.errors.len(), 3, "errors: {:?}", report.errors);
    }

    #[test]
    fn unknown_keys_warn_but_do_not_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "run_dir = \"out\"\nseed = 1\nmystery = true\n\n[limits]\nwat = 3\n",
        );
        let (_, warnings) = validate_config(&path).unwrap();
        assert_eq!(warnings.len(), 2);
        assert!(warnings.iter().any(|w| w.contains("mystery")));
        assert!(warnings.iter().any(|w| w.contains("limits.wat")));
    }

    #[test]
    fn missing_required_keys_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), "[limits]\nverify_pool = 2\n");
        let report = validate_config(&path).unwrap_err();
        assert!(report.errors.iter().any(|e| e.contains("run_dir")));
        assert!(report.errors.iter().any(|e| e.contains("seed")));
    }

    #[test]
    fn paths_resolve_relative_to_config_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sched.toml"), "").unwrap();
        let path = write_config(
            dir.path(),
            "run_dir = \"out\"\nseed = 1\n\n[corpora]\nschedule = \"sched.toml\"\n",
        );
        let (config, _) = validate_config(&path).unwrap();
        assert_eq!(
            config.corpora.schedule.unwrap(),
            dir.path().join("sched.toml")
        );
    }

    #[test]
    fn env_overrides_endpoint_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "run_dir = \"out\"\nseed = 1\n\n[backends.prover]\nkind = \"http\"\nendpoint = \"http://file\"\n",
        );
        std::env::set_var(ENV_PROVER_ENDPOINT, "http://env");
        let (config, _) = validate_config(&path).unwrap();
        std::env::remove_var(ENV_PROVER_ENDPOINT);
        assert_eq!(
            config.backends.prover.endpoint.as_deref(),
            Some("http://env")
        );
    }

    #[test]
    fn structural_simplifier_closes_identical_sides() {
        let s = StructuralSimplifier;
        let resp = s
            .simplify(&SimplifyRequest {
                difference_expression_text: "(x +  0) - (x + 0)".to_string(),
            })
            .unwrap();
        assert_eq!(resp.simplified_text, "0");
        let resp = s
            .simplify(&SimplifyRequest {
                difference_expression_text: "(x + 0) - (x)".to_string(),
            })
            .unwrap();
        assert_ne!(resp.simplified_text, "0");
    }
}
