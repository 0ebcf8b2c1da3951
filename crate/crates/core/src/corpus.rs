//! Canonical data model and line-delimited persistence for statements,
//! proofs, and solved sets, with deduplication and cumulative merging.
//!
//! Record files are JSON-lines: one self-contained object per line, so
//! million-statement corpora can be streamed. Unknown fields on a record are
//! preserved across a load/store round trip. Datasets are immutable after
//! load; merging produces a new set.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeded::derived_rng;
use crate::text::{collapse_whitespace, strip_comments};
use crate::verify::{Verdict, VerdictStatus};

/// The token separating a statement declaration from its proof.
pub const PROOF_DELIMITER: &str = ":=";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: malformed record: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: duplicate id `{id}`")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: solved record references unknown statement `{id}`")]
    UnknownStatement {
        path: String,
        line: usize,
        id: String,
    },
    #[error("proof for `{statement_id}` (sample {sample_index}) does not carry a pass verdict")]
    NotPassing {
        statement_id: String,
        sample_index: u32,
    },
    #[error("manifest `{name}` contains duplicate statement id `{id}`")]
    ManifestDuplicate { name: String, id: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Provenance tag for informal problem sources.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum SourceTag {
    Numina,
    Aops,
    LeanWorkbook,
    Custom(String),
}

impl SourceTag {
    pub fn as_str(&self) -> &str {
        match self {
            SourceTag::Numina => "numina",
            SourceTag::Aops => "aops",
            SourceTag::LeanWorkbook => "leanworkbook",
            SourceTag::Custom(s) => s,
        }
    }
}

impl From<String> for SourceTag {
    fn from(s: String) -> Self {
        match s.as_str() {
            "numina" => SourceTag::Numina,
            "aops" => SourceTag::Aops,
            "leanworkbook" => SourceTag::LeanWorkbook,
            _ => SourceTag::Custom(s),
        }
    }
}

impl From<SourceTag> for String {
    fn from(t: SourceTag) -> Self {
        t.as_str().to_string()
    }
}

/// Which formalizer produced a formal statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formalizer {
    A,
    B,
    Human,
    External,
}

impl Formalizer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Formalizer::A => "a",
            Formalizer::B => "b",
            Formalizer::Human => "human",
            Formalizer::External => "external",
        }
    }
}

/// A natural-language problem statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformalStatement {
    pub id: String,
    pub source: SourceTag,
    pub text: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// A formal theorem statement: header (imports/preamble) plus a body that
/// ends at the proof delimiter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalStatement {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informal_id: Option<String>,
    pub formalizer: Formalizer,
    pub theorem_name: String,
    pub header: String,
    pub body: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl FormalStatement {
    /// Canonical form of the body used for deduplication: comments removed,
    /// whitespace runs collapsed to single spaces, ends trimmed.
    pub fn normalized_key(&self) -> String {
        collapse_whitespace(&strip_comments(&self.body))
    }

    /// Byte offset of the proof delimiter, provided the body contains exactly
    /// one `:=` and nothing but whitespace after it.
    pub fn proof_delimiter(&self) -> Option<usize> {
        let first = self.body.find(PROOF_DELIMITER)?;
        let after = &self.body[first + PROOF_DELIMITER.len()..];
        if after.contains(PROOF_DELIMITER) || !after.trim().is_empty() {
            return None;
        }
        Some(first)
    }

    /// The candidate source unit for checking: body followed by a proof.
    pub fn with_proof(&self, proof_text: &str) -> String {
        format!("{} {}", self.body.trim_end(), proof_text)
    }

    /// Binder groups between the theorem name and the goal colon, e.g.
    /// `["h1 : a = b", "h2 : c = d"]` for `theorem t (h1 : a = b) (h2 : c = d) : g :=`.
    pub fn premise_binders(&self) -> Vec<String> {
        let decl = match self.proof_delimiter() {
            Some(pos) => &self.body[..pos],
            None => self.body.as_str(),
        };
        let mut premises = Vec::new();
        let mut depth = 0u32;
        let mut group_start = None;
        for (idx, ch) in decl.char_indices() {
            match ch {
                '(' | '{' | '[' | '⟨' => {
                    if depth == 0 {
                        group_start = Some(idx + ch.len_utf8());
                    }
                    depth += 1;
                }
                ')' | '}' | ']' | '⟩' => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        if let Some(start) = group_start.take() {
                            let group = decl[start..idx].trim();
                            if group.contains(':') {
                                premises.push(group.to_string());
                            }
                        }
                    }
                }
                ':' if depth == 0 => break,
                _ => {}
            }
        }
        premises
    }

    /// The goal text: everything between the top-level colon that follows the
    /// binders and the proof delimiter.
    pub fn goal_text(&self) -> Option<String> {
        let end = self.proof_delimiter()?;
        let decl = &self.body[..end];
        let mut depth = 0u32;
        for (idx, ch) in decl.char_indices() {
            match ch {
                '(' | '{' | '[' | '⟨' => depth += 1,
                ')' | '}' | ']' | '⟩' => depth = depth.saturating_sub(1),
                ':' if depth == 0 => {
                    // skip `:=`-like and type-ascription arrows; the goal colon
                    // is a bare `:` at depth 0
                    if decl[idx..].starts_with(PROOF_DELIMITER) {
                        continue;
                    }
                    return Some(decl[idx + 1..end].trim().to_string());
                }
                _ => {}
            }
        }
        None
    }
}

/// One sampled proof for a statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofAttempt {
    pub statement_id: String,
    pub proof_text: String,
    pub sample_index: u32,
    pub producer: String,
}

/// A statement paired with exactly one retained verified proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedEntry {
    pub statement: FormalStatement,
    pub proof: ProofAttempt,
    pub iteration_found: u32,
}

/// Persisted form of a [`SolvedEntry`]; the statement is stored by reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedRecord {
    pub statement_id: String,
    pub proof_text: String,
    pub producer: String,
    pub iteration_found: u32,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl From<&SolvedEntry> for SolvedRecord {
    fn from(e: &SolvedEntry) -> Self {
        SolvedRecord {
            statement_id: e.statement.id.clone(),
            proof_text: e.proof.proof_text.clone(),
            producer: e.proof.producer.clone(),
            iteration_found: e.iteration_found,
            extra: BTreeMap::new(),
        }
    }
}

/// Access to the unique id of a record, for keyed dataset loading.
pub trait HasId {
    fn record_id(&self) -> &str;
}

impl HasId for InformalStatement {
    fn record_id(&self) -> &str {
        &self.id
    }
}

impl HasId for FormalStatement {
    fn record_id(&self) -> &str {
        &self.id
    }
}

/// An ordered, id-keyed dataset of records. Order is load/insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    records: IndexMap<String, T>,
}

pub type InformalDataset = Dataset<InformalStatement>;
pub type FormalDataset = Dataset<FormalStatement>;

impl<T: HasId> Dataset<T> {
    pub fn new() -> Self {
        Dataset {
            records: IndexMap::new(),
        }
    }

    /// Insert a record; returns false (and leaves the set unchanged) when the
    /// id is already present.
    pub fn insert(&mut self, record: T) -> bool {
        let id = record.record_id().to_string();
        if self.records.contains_key(&id) {
            return false;
        }
        self.records.insert(id, record);
        true
    }

    pub fn get(&self, id: &str) -> Option<&T> {
        self.records.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.records.values()
    }

    pub fn from_records(records: impl IntoIterator<Item = T>) -> Self {
        let mut ds = Dataset::new();
        for r in records {
            ds.insert(r);
        }
        ds
    }
}

impl<T: HasId> Default for Dataset<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: HasId> FromIterator<T> for Dataset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Dataset::from_records(iter)
    }
}

/// Read a JSONL file into a vector, reporting the offending line on error.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            source: e,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Write records as JSONL, one object per line, in iteration order.
pub fn write_records<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CorpusError::io(path, e))?;
        }
    }
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("record serialization cannot fail");
        writer
            .write_all(line.as_bytes())
            .map_err(|e| CorpusError::io(path, e))?;
        writer
            .write_all(b"\n")
            .map_err(|e| CorpusError::io(path, e))?;
    }
    writer.flush().map_err(|e| CorpusError::io(path, e))?;
    Ok(())
}

/// Load a dataset of id-keyed records, validating id uniqueness.
pub fn load_dataset<T: DeserializeOwned + HasId>(path: &Path) -> Result<Dataset<T>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut ds = Dataset::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            source: e,
        })?;
        let id = record.record_id().to_string();
        if !ds.insert(record) {
            return Err(CorpusError::DuplicateId {
                path: path.display().to_string(),
                line: idx + 1,
                id,
            });
        }
    }
    Ok(ds)
}

/// Load informal statements from a JSONL file.
pub fn load_informal(path: &Path) -> Result<InformalDataset, CorpusError> {
    load_dataset(path)
}

/// Load formal statements from a JSONL file.
pub fn load_formal(path: &Path) -> Result<FormalDataset, CorpusError> {
    load_dataset(path)
}

/// Write a formal dataset back to JSONL.
pub fn write_formal(path: &Path, ds: &FormalDataset) -> Result<(), CorpusError> {
    write_records(path, ds.iter())
}

/// Keep at most one statement per normalized body key; the first occurrence
/// wins and output order is the input order of the survivors.
pub fn dedup_statements(ds: &FormalDataset) -> FormalDataset {
    let mut seen = std::collections::HashSet::new();
    let mut out = FormalDataset::new();
    for stmt in ds.iter() {
        if seen.insert(stmt.normalized_key()) {
            out.insert(stmt.clone());
        }
    }
    out
}

/// Cumulative set of solved statements: at most one retained proof per
/// statement, insertion-ordered, never replaced once present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolvedSet {
    entries: IndexMap<String, SolvedEntry>,
}

impl SolvedSet {
    pub fn new() -> Self {
        SolvedSet::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, statement_id: &str) -> bool {
        self.entries.contains_key(statement_id)
    }

    pub fn get(&self, statement_id: &str) -> Option<&SolvedEntry> {
        self.entries.get(statement_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SolvedEntry> {
        self.entries.values()
    }

    /// Count solved entries per key produced by `f` (e.g. source name).
    pub fn counts_by<K: Ord>(&self, f: impl Fn(&SolvedEntry) -> K) -> BTreeMap<K, usize> {
        let mut counts = BTreeMap::new();
        for e in self.entries.values() {
            *counts.entry(f(e)).or_insert(0) += 1;
        }
        counts
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let records: Vec<SolvedRecord> = self.entries.values().map(SolvedRecord::from).collect();
        write_records(path, records.iter())
    }

    /// Rehydrate a persisted solved set by joining records with the statement
    /// datasets they came from.
    pub fn load(path: &Path, statements: &FormalDataset) -> Result<Self, CorpusError> {
        let records: Vec<SolvedRecord> = read_records(path)?;
        let mut set = SolvedSet::new();
        for (idx, rec) in records.into_iter().enumerate() {
            let statement =
                statements
                    .get(&rec.statement_id)
                    .ok_or_else(|| CorpusError::UnknownStatement {
                        path: path.display().to_string(),
                        line: idx + 1,
                        id: rec.statement_id.clone(),
                    })?;
            set.entries.insert(
                rec.statement_id.clone(),
                SolvedEntry {
                    statement: statement.clone(),
                    proof: ProofAttempt {
                        statement_id: rec.statement_id,
                        proof_text: rec.proof_text,
                        sample_index: 0,
                        producer: rec.producer,
                    },
                    iteration_found: rec.iteration_found,
                },
            );
        }
        Ok(set)
    }
}

/// Merge newly verified proofs into a solved set, cumulatively.
///
/// Statements already present keep the proof they had. A new statement gains
/// exactly one proof, drawn uniformly (seeded) among its passing proofs; the
/// draw is keyed by `(seed, statement id)` so it does not depend on the order
/// the statements arrive in.
pub fn merge_solved(
    existing: &SolvedSet,
    newly_verified: &[(FormalStatement, Vec<(ProofAttempt, Verdict)>)],
    iteration: u32,
    seed: u64,
) -> Result<SolvedSet, CorpusError> {
    let mut merged = existing.clone();
    for (statement, proofs) in newly_verified {
        for (attempt, verdict) in proofs {
            if verdict.status != VerdictStatus::Pass {
                return Err(CorpusError::NotPassing {
                    statement_id: statement.id.clone(),
                    sample_index: attempt.sample_index,
                });
            }
        }
        if proofs.is_empty() || merged.contains(&statement.id) {
            continue;
        }
        let mut rng = derived_rng(seed, &format!("merge:{}", statement.id));
        let pick = rng.gen_range(0..proofs.len());
        merged.entries.insert(
            statement.id.clone(),
            SolvedEntry {
                statement: statement.clone(),
                proof: proofs[pick].0.clone(),
                iteration_found: iteration,
            },
        );
    }
    Ok(merged)
}

/// A named, ordered statement collection with per-tag counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub statement_ids: Vec<String>,
    pub counts: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn from_formal(name: &str, ds: &FormalDataset) -> Self {
        let mut counts = BTreeMap::new();
        for s in ds.iter() {
            *counts.entry(s.formalizer.as_str().to_string()).or_insert(0) += 1;
        }
        DatasetManifest {
            name: name.to_string(),
            statement_ids: ds.iter().map(|s| s.id.clone()).collect(),
            counts,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for id in &self.statement_ids {
            if !seen.insert(id) {
                return Err(CorpusError::ManifestDuplicate {
                    name: self.name.clone(),
                    id: id.clone(),
                });
            }
        }
        Ok(())
    }
}
