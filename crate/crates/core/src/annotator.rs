//! Pluggable annotators.
//!
//! Every model-backed judgement in the toolkit (path mapping, digital/physical
//! labeling, pairwise complexity ordering) goes through [`Annotator`], which
//! turns an [`AnnotationRequest`] into raw text. Parsing and validation of that
//! text happens in the calling module, never in the annotator.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::TaxonomyKind;

pub const ANNOTATOR_URL_ENV: &str = "ATLAS_ANNOTATOR_URL";
pub const ANNOTATOR_KEY_ENV: &str = "ATLAS_ANNOTATOR_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum AnnotationTask {
    PathMapping {
        taxonomy_kind: TaxonomyKind,
        instruction: String,
        taxonomy: String,
    },
    DigitalLabel {
        occupation: String,
        task_text: String,
    },
    OrderingJudge {
        first: String,
        second: String,
    },
}

/// A single annotator call. `key` identifies the call for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub key: String,
    #[serde(flatten)]
    pub task: AnnotationTask,
}

impl AnnotationRequest {
    pub fn prompt(&self) -> String {
        match &self.task {
            AnnotationTask::PathMapping { taxonomy_kind, instruction, taxonomy } => format!(
                "You are given a task instruction and a {taxonomy_kind} taxonomy. Lines starting with '+' are \
                 categories and lines starting with '-' are leaves; indentation encodes nesting.\n\n\
                 {taxonomy}\n\
                 Task: {instruction}\n\n\
                 List every taxonomy path that the task involves, one per line, from the top-level category \
                 down to a leaf, with labels separated by ' > '. Output nothing else. If no path applies, \
                 output an empty response."
            ),
            AnnotationTask::DigitalLabel { occupation, task_text } => format!(
                "You are given an occupational task description, and your task is to classify whether \
                 completing this task primarily requires digital work or physical work.\n\n\
                 Occupation: {occupation}\n\
                 Task: {task_text}\n\n\
                 Return: DIGITAL or PHYSICAL. Provide a one-sentence justification."
            ),
            AnnotationTask::OrderingJudge { first, second } => format!(
                "Imagine planning each task below without executing it. Which task would require more \
                 steps to complete?\n\n\
                 Task A: {first}\n\
                 Task B: {second}\n\n\
                 Answer with A or B."
            ),
        }
    }
}

/// Failure to obtain any output from an annotator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

impl TransportError {
    pub fn transient(message: impl Into<String>) -> Self {
        TransportError { message: message.into(), retryable: true }
    }

    pub fn permanent(message: impl Into<String>) -> Self {
        TransportError { message: message.into(), retryable: false }
    }
}

pub trait Annotator: Send + Sync {
    /// Recorded in every result produced with this annotator.
    fn id(&self) -> &str;

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError>;
}

impl<A: Annotator + ?Sized> Annotator for &A {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        (**self).annotate(request)
    }
}

impl<A: Annotator + ?Sized> Annotator for Box<A> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        (**self).annotate(request)
    }
}

/// Bounded retries with exponential backoff for transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        RetryPolicy { attempts, base_delay: Duration::ZERO }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("annotator failed after {attempts} attempt(s): {last}")]
pub struct RetriesExhausted {
    pub attempts: u32,
    pub last: TransportError,
}

pub fn annotate_with_retry<A: Annotator + ?Sized>(
    annotator: &A,
    request: &AnnotationRequest,
    policy: RetryPolicy,
) -> Result<String, RetriesExhausted> {
    let attempts = policy.attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match annotator.annotate(request) {
            Ok(out) => return Ok(out),
            Err(e) if e.retryable && attempt < attempts => {
                log::warn!("annotator `{}` attempt {attempt} failed: {e}", annotator.id());
                let delay = policy.base_delay.saturating_mul(1 << (attempt - 1).min(16));
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            Err(last) => return Err(RetriesExhausted { attempts: attempt, last }),
        }
    }
}

/// Annotator backed by a closure. Handy for mocks.
pub struct FnAnnotator<F> {
    id: String,
    f: F,
}

impl<F> FnAnnotator<F>
where
    F: Fn(&AnnotationRequest) -> Result<String, TransportError> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnAnnotator { id: id.into(), f }
    }
}

impl<F> Annotator for FnAnnotator<F>
where
    F: Fn(&AnnotationRequest) -> Result<String, TransportError> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        (self.f)(request)
    }
}

/// One keyword rule: if any keyword occurs in the instruction
/// (case-insensitive), the label sequence is emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub keywords: Vec<String>,
    pub labels: Vec<String>,
}

/// Rule file for [`KeywordAnnotator`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeywordRules {
    #[serde(default)]
    pub domain: Vec<KeywordRule>,
    #[serde(default)]
    pub skill: Vec<KeywordRule>,
    /// Tasks containing any of these are labeled DIGITAL, others PHYSICAL.
    #[serde(default)]
    pub digital_keywords: Vec<String>,
}

/// Deterministic rule-based annotator.
///
/// Ordering judgements pick the description with more words (ties go to
/// the first). It is safe for concurrent use.
#[derive(Debug, Clone)]
pub struct KeywordAnnotator {
    id: String,
    rules: KeywordRules,
}

impl KeywordAnnotator {
    pub fn new(id: impl Into<String>, rules: KeywordRules) -> Self {
        KeywordAnnotator { id: id.into(), rules }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let rules: KeywordRules = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(KeywordAnnotator::new(format!("keyword:{}", path.as_ref().display()), rules))
    }

    fn matches(text: &str, keywords: &[String]) -> bool {
        let lower = text.to_lowercase();
        keywords.iter().any(|k| !k.is_empty() && lower.contains(&k.to_lowercase()))
    }
}

impl Annotator for KeywordAnnotator {
    fn id(&self) -> &str {
        &self.id
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        Ok(match &request.task {
            AnnotationTask::PathMapping { taxonomy_kind, instruction, .. } => {
                let rules = match taxonomy_kind {
                    TaxonomyKind::Domain => &self.rules.domain,
                    TaxonomyKind::Skill => &self.rules.skill,
                };
                rules
                    .iter()
                    .filter(|r| Self::matches(instruction, &r.keywords))
                    .map(|r| r.labels.join(" > "))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            AnnotationTask::DigitalLabel { task_text, .. } => {
                if Self::matches(task_text, &self.rules.digital_keywords) {
                    "DIGITAL. The task is carried out with software.".to_string()
                } else {
                    "PHYSICAL. The task is carried out in the physical world.".to_string()
                }
            }
            AnnotationTask::OrderingJudge { first, second } => {
                let words = |s: &str| s.split_whitespace().count();
                if words(second) > words(first) { "B" } else { "A" }.to_string()
            }
        })
    }
}

/// One recorded annotator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedOutput {
    pub key: String,
    pub output: String,
}

/// Replays recorded outputs by request key. Unknown keys are permanent
/// transport failures.
#[derive(Debug, Clone, Default)]
pub struct ReplayAnnotator {
    id: String,
    outputs: HashMap<String, String>,
}

impl ReplayAnnotator {
    pub fn new(id: impl Into<String>, outputs: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayAnnotator { id: id.into(), outputs: outputs.into_iter().collect() }
    }

    /// Loads a JSON-lines file of [`RecordedOutput`] records.
    pub fn from_jsonl(id: impl Into<String>, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut outputs = HashMap::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordedOutput = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1))
            })?;
            outputs.insert(rec.key, rec.output);
        }
        Ok(ReplayAnnotator::new(id, outputs))
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl Annotator for ReplayAnnotator {
    fn id(&self) -> &str {
        &self.id
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        self.outputs
            .get(&request.key)
            .cloned()
            .ok_or_else(|| TransportError::permanent(format!("no recorded output for `{}`", request.key)))
    }
}

/// Wraps an annotator and records every successful exchange, so a live
/// session can be replayed later.
pub struct RecordingAnnotator<A> {
    inner: A,
    log: Mutex<Vec<RecordedOutput>>,
}

impl<A: Annotator> RecordingAnnotator<A> {
    pub fn new(inner: A) -> Self {
        RecordingAnnotator { inner, log: Mutex::new(Vec::new()) }
    }

    /// Recorded exchanges sorted by key.
    pub fn recorded(&self) -> Vec<RecordedOutput> {
        let mut v = self.log.lock().expect("recording log poisoned").clone();
        v.sort_by(|a, b| a.key.cmp(&b.key));
        v
    }
}

impl<A: Annotator> Annotator for RecordingAnnotator<A> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        let out = self.inner.annotate(request)?;
        self.log
            .lock()
            .expect("recording log poisoned")
            .push(RecordedOutput { key: request.key.clone(), output: out.clone() });
        Ok(out)
    }
}

/// HTTP annotator. Sends `{"key", "prompt", ...request}` as JSON and accepts
/// either a JSON body with an `output` string field or a plain-text body.
pub struct RemoteAnnotator {
    id: String,
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteAnnotator {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let url = url.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::permanent(format!("cannot build HTTP client: {e}")))?;
        Ok(RemoteAnnotator { id: format!("remote:{url}"), url, api_key, client })
    }

    /// Reads the endpoint and credential from the environment.
    pub fn from_env() -> Result<Self, TransportError> {
        let url = std::env::var(ANNOTATOR_URL_ENV)
            .map_err(|_| TransportError::permanent(format!("{ANNOTATOR_URL_ENV} is not set")))?;
        let key = std::env::var(ANNOTATOR_KEY_ENV).ok();
        Self::new(url, key, Duration::from_secs(120))
    }
}

#[derive(Serialize)]
struct RemoteBody<'a> {
    prompt: String,
    #[serde(flatten)]
    request: &'a AnnotationRequest,
}

#[derive(Deserialize)]
struct RemoteReply {
    output: String,
}

impl Annotator for RemoteAnnotator {
    fn id(&self) -> &str {
        &self.id
    }

    fn annotate(&self, request: &AnnotationRequest) -> Result<String, TransportError> {
        let body = serde_json::to_vec(&RemoteBody { prompt: request.prompt(), request })
            .map_err(|e| TransportError::permanent(e.to_string()))?;
        let mut req = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError::transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::transient(e.to_string()))?;
        if !status.is_success() {
            let msg = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if status.is_server_error() || status.as_u16() == 429 {
                TransportError::transient(msg)
            } else {
                TransportError::permanent(msg)
            });
        }
        match serde_json::from_str::<RemoteReply>(&text) {
            Ok(reply) => Ok(reply.output),
            Err(_) => Ok(text),
        }
    }
}
