//! Mapping benchmark examples onto taxonomy paths.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::{annotate_with_retry, AnnotationRequest, AnnotationTask, Annotator, RetriesExhausted, RetryPolicy};
use crate::scalar::Scalar;
use crate::taxonomy::{ResolveError, Taxonomy, TaxonomyKind, TaxonomyPath};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskExample {
    pub benchmark: String,
    pub example_id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl TaskExample {
    pub fn new(benchmark: impl Into<String>, example_id: impl Into<String>, instruction: impl Into<String>) -> Self {
        TaskExample {
            benchmark: benchmark.into(),
            example_id: example_id.into(),
            instruction: instruction.into(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn key(&self) -> ExampleKey {
        ExampleKey { benchmark: self.benchmark.clone(), example_id: self.example_id.clone() }
    }
}

/// `(benchmark, example_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExampleKey {
    pub benchmark: String,
    pub example_id: String,
}

impl std::fmt::Display for ExampleKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.benchmark, self.example_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingStatus {
    Mapped,
    Empty,
    Invalid,
}

impl MappingStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MappingStatus::Mapped => "mapped",
            MappingStatus::Empty => "empty",
            MappingStatus::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingResult {
    pub example: ExampleKey,
    pub taxonomy_kind: TaxonomyKind,
    /// Distinct validated paths in first-seen order.
    pub paths: Vec<TaxonomyPath>,
    pub status: MappingStatus,
    pub raw_annotator_output: String,
    pub annotator_id: String,
}

impl MappingResult {
    /// Builds a result, deduplicating `paths` and deriving the status from
    /// the number of parsed candidates.
    pub fn from_candidates(
        example: ExampleKey,
        taxonomy_kind: TaxonomyKind,
        candidate_count: usize,
        resolved: impl IntoIterator<Item = TaxonomyPath>,
        raw: String,
        annotator_id: String,
    ) -> Self {
        let mut seen = HashSet::new();
        let paths: Vec<_> = resolved.into_iter().filter(|p| seen.insert(p.clone())).collect();
        let status = if candidate_count == 0 {
            MappingStatus::Empty
        } else if paths.is_empty() {
            MappingStatus::Invalid
        } else {
            MappingStatus::Mapped
        };
        MappingResult { example, taxonomy_kind, paths, status, raw_annotator_output: raw, annotator_id }
    }

    pub fn path_set(&self) -> BTreeSet<&TaxonomyPath> {
        self.paths.iter().collect()
    }
}

/// Line-per-record persisted form of a [`MappingResult`]. Paths are label
/// sequences so files stay readable and taxonomy-id independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRecord {
    pub benchmark: String,
    pub example_id: String,
    pub taxonomy_kind: TaxonomyKind,
    pub status: MappingStatus,
    pub paths: Vec<Vec<String>>,
    pub annotator_id: String,
    pub raw: String,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{example}: record is for the {found} taxonomy, expected {expected}")]
    WrongKind { example: ExampleKey, expected: TaxonomyKind, found: TaxonomyKind },
    #[error("{example}: path {labels:?} does not resolve: {source}")]
    UnresolvedPath { example: ExampleKey, labels: Vec<String>, source: ResolveError },
    #[error("{example}: status `{status}` disagrees with {paths} stored path(s)")]
    StatusMismatch { example: ExampleKey, status: &'static str, paths: usize },
}

impl MappingRecord {
    pub fn from_result(result: &MappingResult, taxonomy: &Taxonomy) -> Self {
        MappingRecord {
            benchmark: result.example.benchmark.clone(),
            example_id: result.example.example_id.clone(),
            taxonomy_kind: result.taxonomy_kind,
            status: result.status,
            paths: result.paths.iter().map(|p| taxonomy.labels(p).unwrap_or_default()).collect(),
            annotator_id: result.annotator_id.clone(),
            raw: result.raw_annotator_output.clone(),
        }
    }

    /// Re-resolves every stored path against `taxonomy`.
    pub fn into_result(self, taxonomy: &Taxonomy) -> Result<MappingResult, RecordError> {
        let example = ExampleKey { benchmark: self.benchmark, example_id: self.example_id };
        if self.taxonomy_kind != taxonomy.kind() {
            return Err(RecordError::WrongKind { example, expected: taxonomy.kind(), found: self.taxonomy_kind });
        }
        let mut paths = Vec::with_capacity(self.paths.len());
        for labels in self.paths {
            match taxonomy.resolve_path(&labels) {
                Ok(p) => paths.push(p),
                Err(source) => return Err(RecordError::UnresolvedPath { example, labels, source }),
            }
        }
        let consistent = match self.status {
            MappingStatus::Mapped => !paths.is_empty(),
            MappingStatus::Empty | MappingStatus::Invalid => paths.is_empty(),
        };
        if !consistent {
            return Err(RecordError::StatusMismatch { example, status: self.status.as_str(), paths: paths.len() });
        }
        let mut seen = HashSet::new();
        paths.retain(|p| seen.insert(p.clone()));
        Ok(MappingResult {
            example,
            taxonomy_kind: self.taxonomy_kind,
            paths,
            status: self.status,
            raw_annotator_output: self.raw,
            annotator_id: self.annotator_id,
        })
    }
}

/// Reads any JSON-lines file into records, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> std::io::Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Parsed annotator output: one entry per candidate line or array element.
/// Entries that do not follow the candidate grammar are kept as errors.
pub type ParsedCandidates = Vec<Result<Vec<String>, String>>;

/// Parses annotator output into candidate label sequences.
///
/// Accepted forms: a JSON array of label arrays, a JSON object with a
/// `paths` field holding such an array, or one `A > B > C` sequence per
/// line (optionally bulleted). A line without a `>` separator is prose and
/// is a parse failure. Blank output, `[]` and `NONE` mean zero candidates.
pub fn parse_candidates(raw: &str) -> ParsedCandidates {
    let mut text = raw.trim();
    if let Some(inner) = text.strip_prefix("```") {
        let inner = inner.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
        text = inner.strip_suffix("```").unwrap_or(inner).trim();
    }
    if text.is_empty() || text.eq_ignore_ascii_case("none") {
        return Vec::new();
    }
    if text.starts_with('[') || text.starts_with('{') {
        return parse_json_candidates(text);
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let body = strip_bullet(line);
            if !body.contains('>') {
                return Err(format!("not a label sequence: `{line}`"));
            }
            let labels: Vec<String> = body.split('>').map(|s| s.trim().to_string()).collect();
            if labels.iter().any(String::is_empty) {
                return Err(format!("empty label in `{line}`"));
            }
            Ok(labels)
        })
        .collect()
}

fn strip_bullet(line: &str) -> &str {
    let l = line.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = l.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = l[digits..].strip_prefix(['.', ')']) {
            return rest.trim_start();
        }
    }
    l
}

fn parse_json_candidates(text: &str) -> ParsedCandidates {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        List(Vec<serde_json::Value>),
        Object { paths: Vec<serde_json::Value> },
    }
    let items = match serde_json::from_str::<Doc>(text) {
        Ok(Doc::List(v)) | Ok(Doc::Object { paths: v }) => v,
        Err(e) => return vec![Err(format!("malformed JSON candidate list: {e}"))],
    };
    items
        .into_iter()
        .map(|item| match item {
            serde_json::Value::Array(labels) => labels
                .into_iter()
                .map(|l| match l {
                    serde_json::Value::String(s) if !s.trim().is_empty() => Ok(s),
                    other => Err(format!("label is not a non-empty string: {other}")),
                })
                .collect(),
            serde_json::Value::String(s) if s.contains('>') => {
                Ok(s.split('>').map(|x| x.trim().to_string()).collect())
            }
            other => Err(format!("candidate is not a label sequence: {other}")),
        })
        .collect()
}

pub fn mapping_key(kind: TaxonomyKind, example: &ExampleKey) -> String {
    format!("{kind}/{}/{}", example.benchmark, example.example_id)
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("{example}: {source}")]
    Transport { example: ExampleKey, source: RetriesExhausted },
}

/// Maps one example onto `taxonomy`. Unresolvable candidates are dropped;
/// the result is `invalid` only when no candidate resolves.
pub fn map_example<A: Annotator + ?Sized>(
    example: &TaskExample,
    taxonomy: &Taxonomy,
    flattened: &str,
    annotator: &A,
    policy: RetryPolicy,
) -> Result<MappingResult, MappingError> {
    let key = example.key();
    let request = AnnotationRequest {
        key: mapping_key(taxonomy.kind(), &key),
        task: AnnotationTask::PathMapping {
            taxonomy_kind: taxonomy.kind(),
            instruction: example.instruction.clone(),
            taxonomy: flattened.to_string(),
        },
    };
    let raw = annotate_with_retry(annotator, &request, policy)
        .map_err(|source| MappingError::Transport { example: key.clone(), source })?;
    let candidates = parse_candidates(&raw);
    let resolved: Vec<_> = candidates
        .iter()
        .filter_map(|c| c.as_ref().ok())
        .filter_map(|labels| taxonomy.resolve_path(labels).ok())
        .collect();
    Ok(MappingResult::from_candidates(
        key,
        taxonomy.kind(),
        candidates.len(),
        resolved,
        raw,
        annotator.id().to_string(),
    ))
}

/// Example dropped at ingest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedExample {
    pub example: ExampleKey,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub mapped: usize,
    pub empty: usize,
    pub invalid: usize,
}

impl OutcomeCounts {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a MappingResult>) -> Self {
        let mut c = OutcomeCounts::default();
        for r in results {
            match r.status {
                MappingStatus::Mapped => c.mapped += 1,
                MappingStatus::Empty => c.empty += 1,
                MappingStatus::Invalid => c.invalid += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.mapped + self.empty + self.invalid
    }
}

#[derive(Debug, Clone)]
pub struct CorpusMapping {
    /// One result per accepted example, in input order.
    pub results: Vec<MappingResult>,
    pub rejected: Vec<RejectedExample>,
    pub counts: OutcomeCounts,
}

#[derive(Debug, Error)]
#[error("corpus mapping aborted after {} completed result(s): {error}", .partial.len())]
pub struct CorpusAbort {
    /// Results completed before the abort, in input order.
    pub partial: Vec<MappingResult>,
    pub rejected: Vec<RejectedExample>,
    pub error: MappingError,
}

/// Drops examples with empty instructions or duplicate keys.
pub fn ingest(corpus: &[TaskExample]) -> (Vec<&TaskExample>, Vec<RejectedExample>) {
    let mut seen = HashSet::new();
    let mut accepted = Vec::with_capacity(corpus.len());
    let mut rejected = Vec::new();
    for e in corpus {
        if e.instruction.trim().is_empty() {
            rejected.push(RejectedExample { example: e.key(), reason: "empty instruction".into() });
        } else if !seen.insert(e.key()) {
            rejected.push(RejectedExample { example: e.key(), reason: "duplicate (benchmark, example_id)".into() });
        } else {
            accepted.push(e);
        }
    }
    (accepted, rejected)
}

/// Maps a corpus with up to `parallelism` concurrent annotator calls.
/// Output order always matches input order.
pub fn map_corpus<A: Annotator + ?Sized>(
    corpus: &[TaskExample],
    taxonomy: &Taxonomy,
    annotator: &A,
    parallelism: usize,
    policy: RetryPolicy,
) -> Result<CorpusMapping, CorpusAbort> {
    let (accepted, rejected) = ingest(corpus);
    let flattened = taxonomy.flatten_for_prompt();
    let abort = AtomicBool::new(false);
    let run = |e: &&TaskExample| -> Option<Result<MappingResult, MappingError>> {
        if abort.load(Ordering::SeqCst) {
            return None;
        }
        let r = map_example(e, taxonomy, &flattened, annotator, policy);
        if r.is_err() {
            abort.store(true, Ordering::SeqCst);
        }
        Some(r)
    };
    let outcomes: Vec<_> = if parallelism <= 1 {
        accepted.iter().map(run).collect()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
            Ok(pool) => pool.install(|| accepted.par_iter().map(run).collect()),
            Err(_) => accepted.iter().map(run).collect(),
        }
    };
    let mut results = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for o in outcomes.into_iter().flatten() {
        match o {
            Ok(r) => results.push(r),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(error) => Err(CorpusAbort { partial: results, rejected, error }),
        None => {
            let counts = OutcomeCounts::from_results(&results);
            Ok(CorpusMapping { results, rejected, counts })
        }
    }
}

/// Outcome fractions for one group. `benchmark == None` is the pooled row.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRow<S> {
    pub taxonomy_kind: TaxonomyKind,
    pub benchmark: Option<String>,
    pub counts: OutcomeCounts,
    pub mapped: S,
    pub empty: S,
    pub invalid: S,
}

/// Mapped/empty/invalid fractions per taxonomy kind, pooled and per
/// benchmark. Rows are sorted by kind, then pooled first, then benchmark.
pub fn mapping_outcome_stats<S: Scalar>(results: &[MappingResult]) -> Vec<OutcomeRow<S>> {
    let mut groups: BTreeMap<(TaxonomyKind, Option<&str>), OutcomeCounts> = BTreeMap::new();
    for r in results {
        for bench in [None, Some(r.example.benchmark.as_str())] {
            let c = groups.entry((r.taxonomy_kind, bench)).or_default();
            match r.status {
                MappingStatus::Mapped => c.mapped += 1,
                MappingStatus::Empty => c.empty += 1,
                MappingStatus::Invalid => c.invalid += 1,
            }
        }
    }
    groups
        .into_iter()
        .map(|((kind, bench), counts)| {
            let n = counts.total();
            OutcomeRow {
                taxonomy_kind: kind,
                benchmark: bench.map(str::to_string),
                mapped: S::ratio(counts.mapped, n),
                empty: S::ratio(counts.empty, n),
                invalid: S::ratio(counts.invalid, n),
                counts,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AllCorrect,
    AllWrong,
    Missing,
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricVerdict {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl RubricVerdict {
    pub fn plain(verdict: Verdict) -> Self {
        RubricVerdict { verdict, notes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RubricError {
    #[error("predicted and reference path sets are both empty; nothing to judge")]
    NothingToJudge,
    #[error("verdict lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("verdict lists are empty")]
    Empty,
}

/// Classifies a predicted path set against a reference set.
///
/// Partial overlaps where neither set contains the other are classified
/// as `extra`, with the missing reference paths noted.
pub fn score_against_reference<T: Ord>(
    predicted: &BTreeSet<T>,
    reference: &BTreeSet<T>,
) -> Result<RubricVerdict, RubricError> {
    if predicted.is_empty() && reference.is_empty() {
        return Err(RubricError::NothingToJudge);
    }
    if predicted == reference {
        return Ok(RubricVerdict::plain(Verdict::AllCorrect));
    }
    let overlap = predicted.intersection(reference).count();
    if overlap == 0 && !predicted.is_empty() {
        let notes = reference.is_empty().then(|| "reference assigns no paths".to_string());
        return Ok(RubricVerdict { verdict: Verdict::AllWrong, notes });
    }
    if predicted.is_subset(reference) {
        return Ok(RubricVerdict::plain(Verdict::Missing));
    }
    if reference.is_subset(predicted) {
        return Ok(RubricVerdict::plain(Verdict::Extra));
    }
    let missing = reference.len() - overlap;
    let extra = predicted.len() - overlap;
    Ok(RubricVerdict {
        verdict: Verdict::Extra,
        notes: Some(format!("mixed overlap: {extra} extra and {missing} missing path(s); missing flagged")),
    })
}

/// Fraction of aligned positions with the same verdict.
pub fn agreement_rate<S: Scalar>(a: &[RubricVerdict], b: &[RubricVerdict]) -> Result<S, RubricError> {
    if a.len() != b.len() {
        return Err(RubricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(RubricError::Empty);
    }
    let same = a.iter().zip(b).filter(|(x, y)| x.verdict == y.verdict).count();
    Ok(S::ratio(same, a.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::{FnAnnotator, TransportError};
    use crate::scalar::Exact;
    use crate::taxonomy::fixtures::{small_domain, small_skill};

    fn canned(output: &'static str) -> impl Annotator {
        FnAnnotator::new("canned", move |_| Ok(output.to_string()))
    }

    #[test]
    fn zero_candidates_is_empty() {
        let t = small_domain();
        let e = TaskExample::new("b", "1", "do something");
        let r = map_example(&e, &t, "", &canned(""), RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.status, MappingStatus::Empty);
        assert!(r.paths.is_empty());
        let r = map_example(&e, &t, "", &canned("[]"), RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.status, MappingStatus::Empty);
    }

    #[test]
    fn one_valid_one_unresolvable_is_mapped_with_one_path() {
        let t = small_domain();
        let e = TaskExample::new("b", "1", "post entries");
        let a = canned(
            "Business and Financial Operations > Accountants > prepare adjusting journal entries\n\
             Legal > Lawyers > draft contracts",
        );
        let r = map_example(&e, &t, "", &a, RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.status, MappingStatus::Mapped);
        assert_eq!(r.paths.len(), 1);
        assert_eq!(r.paths[0].node_ids, vec!["f1", "o1", "t1"]);
        assert_eq!(r.annotator_id, "canned");
        assert!(r.raw_annotator_output.contains("Lawyers"));
    }

    #[test]
    fn prose_and_partial_paths_are_invalid() {
        let s = small_skill();
        let e = TaskExample::new("b", "1", "x");
        let r = map_example(&e, &s, "", &canned("This task is mostly about reading."), RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.status, MappingStatus::Invalid);
        let r = map_example(&e, &s, "", &canned(r#"[["Information Input"]]"#), RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.status, MappingStatus::Invalid);
        let r = map_example(&e, &s, "", &canned("[[\"broken"), RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.status, MappingStatus::Invalid);
    }

    #[test]
    fn duplicate_candidates_are_collapsed() {
        let s = small_skill();
        let e = TaskExample::new("b", "1", "x");
        let out = "1. Work Output > Interacting With Computers > Working with Computers\n\
                   - work output >  interacting with computers > working with computers";
        let r = map_example(&e, &s, "", &canned(out), RetryPolicy::immediate(1)).unwrap();
        assert_eq!(r.paths.len(), 1);
    }

    #[test]
    fn json_forms_parse() {
        let c = parse_candidates(r#"{"paths": [["a", "b", "c"], "x > y > z"]}"#);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].as_ref().unwrap(), &vec!["x".to_string(), "y".into(), "z".into()]);
        let c = parse_candidates("```json\n[[\"a\",\"b\"]]\n```");
        assert_eq!(c, vec![Ok(vec!["a".to_string(), "b".to_string()])]);
        assert!(parse_candidates("NONE").is_empty());
        assert!(parse_candidates("a >  > c")[0].is_err());
    }

    #[test]
    fn transport_failure_surfaces_attempt_count() {
        let t = small_domain();
        let a = FnAnnotator::new("down", |_| Err(TransportError::transient("timeout")));
        let err = map_example(&TaskExample::new("b", "1", "x"), &t, "", &a, RetryPolicy::immediate(3)).unwrap_err();
        let MappingError::Transport { source, .. } = err;
        assert_eq!(source.attempts, 3);
    }

    #[test]
    fn corpus_rejects_empty_instructions_and_keeps_order() {
        let t = small_domain();
        let mut corpus: Vec<_> = (0..10).map(|i| TaskExample::new("b", i.to_string(), format!("task {i}"))).collect();
        corpus[4].instruction = "   ".into();
        let a = canned("Computer and Mathematical > Software Developers > write application code");
        let out = map_corpus(&corpus, &t, &a, 4, RetryPolicy::immediate(1)).unwrap();
        assert_eq!(out.results.len(), 9);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].example.example_id, "4");
        let ids: Vec<_> = out.results.iter().map(|r| r.example.example_id.as_str()).collect();
        assert_eq!(ids, vec!["0", "1", "2", "3", "5", "6", "7", "8", "9"]);
    }

    #[test]
    fn corpus_abort_keeps_partial_results() {
        let t = small_domain();
        let corpus: Vec<_> = (0..5).map(|i| TaskExample::new("b", i.to_string(), format!("task {i}"))).collect();
        let a = FnAnnotator::new("half", |req: &AnnotationRequest| {
            if req.key.ends_with("/3") {
                Err(TransportError::transient("boom"))
            } else {
                Ok(String::new())
            }
        });
        let abort = map_corpus(&corpus, &t, &a, 1, RetryPolicy::immediate(2)).unwrap_err();
        assert_eq!(abort.partial.len(), 3);
    }

    #[test]
    fn outcome_fractions() {
        let mk = |i: usize, status| MappingResult {
            example: ExampleKey { benchmark: "b".into(), example_id: i.to_string() },
            taxonomy_kind: TaxonomyKind::Domain,
            paths: vec![],
            status,
            raw_annotator_output: String::new(),
            annotator_id: "x".into(),
        };
        let mut rs: Vec<_> = (0..8).map(|i| mk(i, MappingStatus::Mapped)).collect();
        rs.push(mk(8, MappingStatus::Empty));
        rs.push(mk(9, MappingStatus::Invalid));
        let rows = mapping_outcome_stats::<Exact>(&rs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].benchmark, None);
        assert_eq!(rows[0].mapped, Exact::new(4, 5));
        assert_eq!(rows[0].empty, Exact::new(1, 10));
        assert_eq!(rows[0].invalid, Exact::new(1, 10));
        assert!(mapping_outcome_stats::<f64>(&[]).is_empty());
    }

    #[test]
    fn rubric_cases() {
        let s = |v: &[u32]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(score_against_reference(&s(&[1, 2]), &s(&[1, 2])).unwrap().verdict, Verdict::AllCorrect);
        assert_eq!(score_against_reference(&s(&[1]), &s(&[2])).unwrap().verdict, Verdict::AllWrong);
        assert_eq!(score_against_reference(&s(&[1]), &s(&[1, 2])).unwrap().verdict, Verdict::Missing);
        assert_eq!(score_against_reference(&s(&[1, 2]), &s(&[1])).unwrap().verdict, Verdict::Extra);
        let mixed = score_against_reference(&s(&[1, 3]), &s(&[1, 2])).unwrap();
        assert_eq!(mixed.verdict, Verdict::Extra);
        assert!(mixed.notes.unwrap().contains("missing"));
        assert_eq!(score_against_reference(&s(&[]), &s(&[])), Err(RubricError::NothingToJudge));
    }

    #[test]
    fn agreement() {
        let v = |x| RubricVerdict::plain(x);
        let a: Vec<_> = (0..10).map(|_| v(Verdict::AllCorrect)).collect();
        let mut b = a.clone();
        assert_eq!(agreement_rate::<f64>(&a, &b).unwrap(), 1.0);
        b[3] = v(Verdict::Missing);
        assert_eq!(agreement_rate::<Exact>(&a, &b).unwrap(), Exact::new(9, 10));
        assert_eq!(agreement_rate::<f64>(&a, &b[..5]), Err(RubricError::LengthMismatch(10, 5)));
    }

    #[test]
    fn records_round_trip_and_validate() {
        let t = small_domain();
        let e = TaskExample::new("b", "1", "x");
        let a = canned("Computer and Mathematical > Software Developers > debug software defects");
        let r = map_example(&e, &t, "", &a, RetryPolicy::immediate(1)).unwrap();
        let rec = MappingRecord::from_result(&r, &t);
        assert_eq!(rec.clone().into_result(&t).unwrap(), r);
        let mut bad = rec.clone();
        bad.paths[0][2] = "nope".into();
        assert!(matches!(bad.into_result(&t), Err(RecordError::UnresolvedPath { .. })));
        assert!(matches!(rec.into_result(&small_skill()), Err(RecordError::WrongKind { .. })));
    }
}
