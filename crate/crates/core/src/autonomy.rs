//! Workflow complexity, per-level success rates and autonomy levels.
//!
//! A node's complexity is the number of leaf steps beneath it, the node
//! itself included, so a leaf has complexity 1.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::annotator::{annotate_with_retry, AnnotationRequest, AnnotationTask, Annotator, RetriesExhausted, RetryPolicy};
use crate::mapping::{ExampleKey, MappingResult};
use crate::scalar::Scalar;
use crate::taxonomy::{Taxonomy, TaxonomyKind};

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_MIN_SAMPLES: usize = 10;
pub const UNATTRIBUTED: &str = "unattributed";
pub const OVERALL: &str = "overall";

/// One-sided 95% normal quantile.
const Z_95_ONE_SIDED: f64 = 1.6448536269514722;

#[derive(Debug, Error)]
pub enum AutonomyError {
    #[error("workflow `{0}` has no root")]
    Empty(String),
    #[error("workflow `{trajectory}`: node id `{node}` appears more than once")]
    DuplicateNode { trajectory: String, node: String },
    #[error("unknown grouping `{0}` (expected overall, benchmark, agent, model, domain_family or skill_category)")]
    UnknownGrouping(String),
    #[error("grouping by {0} needs mapping results")]
    MissingAttribution(Grouping),
    #[error("no workflow contains nodes at two adjacent complexity levels")]
    NoAdjacentPairs,
    #[error("threshold must lie in (0, 1]")]
    Threshold,
    #[error("min_samples must be at least 1")]
    MinSamples,
    #[error("none of the task's groups {0:?} has a curve")]
    NoMatchedGroups(Vec<String>),
    #[error(transparent)]
    Judge(#[from] RetriesExhausted),
}

fn status_de<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Bool(bool),
    }
    match Raw::deserialize(d)? {
        Raw::Bool(b) => Ok(b),
        Raw::Int(0) => Ok(false),
        Raw::Int(1) => Ok(true),
        Raw::Int(n) => Err(serde::de::Error::custom(format!("status must be 0 or 1, got {n}"))),
    }
}

fn status_ser<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowNode {
    pub id: String,
    #[serde(default)]
    pub description: String,
    /// `true` for success. Serialized as 0/1.
    #[serde(deserialize_with = "status_de", serialize_with = "status_ser")]
    pub status: bool,
    #[serde(default)]
    pub children: Vec<WorkflowNode>,
}

impl WorkflowNode {
    pub fn leaf(id: impl Into<String>, description: impl Into<String>, status: bool) -> Self {
        WorkflowNode { id: id.into(), description: description.into(), status, children: Vec::new() }
    }

    pub fn with_children(mut self, children: Vec<WorkflowNode>) -> Self {
        self.children = children;
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// One trajectory's workflow with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDoc {
    pub benchmark: String,
    pub agent: String,
    pub model: String,
    pub trajectory_id: String,
    /// Links the workflow to the benchmark example it solves, for domain
    /// and skill grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_id: Option<String>,
    #[serde(default)]
    pub root: Option<WorkflowNode>,
}

impl WorkflowDoc {
    pub fn example_key(&self) -> Option<ExampleKey> {
        self.example_id
            .as_ref()
            .map(|id| ExampleKey { benchmark: self.benchmark.clone(), example_id: id.clone() })
    }

    /// Complexity of every node, after checking the tree is usable.
    pub fn complexity(&self) -> Result<Vec<ComplexityAssignment>, AutonomyError> {
        let root = self.root.as_ref().ok_or_else(|| AutonomyError::Empty(self.trajectory_id.clone()))?;
        let nodes = complexity(root);
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.node_id.as_str()) {
                return Err(AutonomyError::DuplicateNode {
                    trajectory: self.trajectory_id.clone(),
                    node: n.node_id.clone(),
                });
            }
        }
        Ok(nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityAssignment {
    pub node_id: String,
    pub description: String,
    /// 0 for the root.
    pub depth: usize,
    pub complexity: usize,
    pub status: bool,
}

/// Assigns each node its leaf-descendant count, in pre-order.
pub fn complexity(root: &WorkflowNode) -> Vec<ComplexityAssignment> {
    fn walk(node: &WorkflowNode, depth: usize, out: &mut Vec<ComplexityAssignment>) -> usize {
        let slot = out.len();
        out.push(ComplexityAssignment {
            node_id: node.id.clone(),
            description: node.description.clone(),
            depth,
            complexity: 0,
            status: node.status,
        });
        let c = if node.is_leaf() { 1 } else { node.children.iter().map(|c| walk(c, depth + 1, out)).sum() };
        out[slot].complexity = c;
        c
    }
    let mut out = Vec::new();
    walk(root, 0, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Overall,
    Benchmark,
    Agent,
    Model,
    DomainFamily,
    SkillCategory,
}

impl Grouping {
    pub const ALL: [Grouping; 6] = [
        Grouping::Overall,
        Grouping::Benchmark,
        Grouping::Agent,
        Grouping::Model,
        Grouping::DomainFamily,
        Grouping::SkillCategory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Overall => "overall",
            Grouping::Benchmark => "benchmark",
            Grouping::Agent => "agent",
            Grouping::Model => "model",
            Grouping::DomainFamily => "domain_family",
            Grouping::SkillCategory => "skill_category",
        }
    }

    fn needs_attribution(self) -> bool {
        matches!(self, Grouping::DomainFamily | Grouping::SkillCategory)
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grouping {
    type Err = AutonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Grouping::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim())
            .ok_or_else(|| AutonomyError::UnknownGrouping(s.to_string()))
    }
}

/// Domain families (level 1) and skill categories (level 2) reached by
/// each mapped example. Workflows inherit the groups of their example.
#[derive(Debug, Clone, Default)]
pub struct Attribution {
    families: HashMap<ExampleKey, Vec<String>>,
    categories: HashMap<ExampleKey, Vec<String>>,
    labels: BTreeMap<String, String>,
}

impl Attribution {
    pub fn from_results(results: &[MappingResult], domain: &Taxonomy, skill: &Taxonomy) -> Self {
        let mut a = Attribution::default();
        for r in results {
            let (t, level, target) = match r.taxonomy_kind {
                TaxonomyKind::Domain => (domain, 1, &mut a.families),
                TaxonomyKind::Skill => (skill, 2, &mut a.categories),
            };
            if t.kind() != r.taxonomy_kind {
                continue;
            }
            let groups = target.entry(r.example.clone()).or_default();
            for p in &r.paths {
                if let Some(id) = p.id_at_level(level) {
                    if !groups.iter().any(|g| g == id) {
                        groups.push(id.to_string());
                    }
                    if let Some(n) = t.node(id) {
                        a.labels.insert(id.to_string(), n.label().to_string());
                    }
                }
            }
        }
        a
    }

    /// Groups of one example under `grouping`; empty when unmapped.
    pub fn groups(&self, grouping: Grouping, key: &ExampleKey) -> &[String] {
        let map = match grouping {
            Grouping::DomainFamily => &self.families,
            Grouping::SkillCategory => &self.categories,
            _ => return &[],
        };
        map.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn label(&self, id: &str) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats<S> {
    pub successes: usize,
    pub totals: usize,
    pub sr: S,
    /// One-sided 95% Wilson lower bound on the success rate.
    pub lcb: f64,
}

/// Wilson score lower bound, one-sided 95%.
pub fn wilson_lower_bound(successes: usize, totals: usize) -> f64 {
    if totals == 0 {
        return 0.0;
    }
    let n = totals as f64;
    let p = successes as f64 / n;
    let z2 = Z_95_ONE_SIDED * Z_95_ONE_SIDED;
    let centre = p + z2 / (2.0 * n);
    let margin = Z_95_ONE_SIDED * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - margin) / (1.0 + z2 / n)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutonomyCurve<S> {
    pub grouping: Grouping,
    pub group: String,
    pub group_label: String,
    pub levels: BTreeMap<usize, LevelStats<S>>,
}

impl<S: Scalar> AutonomyCurve<S> {
    fn from_counts(grouping: Grouping, group: String, group_label: String, counts: BTreeMap<usize, (usize, usize)>) -> Self {
        let levels = counts
            .into_iter()
            .map(|(k, (successes, totals))| {
                let stats = LevelStats {
                    successes,
                    totals,
                    sr: S::ratio(successes, totals),
                    lcb: wilson_lower_bound(successes, totals),
                };
                (k, stats)
            })
            .collect();
        AutonomyCurve { grouping, group, group_label, levels }
    }

    pub fn node_count(&self) -> usize {
        self.levels.values().map(|l| l.totals).sum()
    }
}

/// Pools every node of every workflow in a group by complexity level.
/// Workflows attributed to several groups count once in each.
pub fn success_rates<S: Scalar>(
    workflows: &[WorkflowDoc],
    grouping: Grouping,
    attribution: Option<&Attribution>,
) -> Result<Vec<AutonomyCurve<S>>, AutonomyError> {
    if grouping.needs_attribution() && attribution.is_none() {
        return Err(AutonomyError::MissingAttribution(grouping));
    }
    let per_workflow: Vec<Vec<ComplexityAssignment>> =
        workflows.par_iter().map(WorkflowDoc::complexity).collect::<Result<_, _>>()?;

    let mut groups: BTreeMap<String, BTreeMap<usize, (usize, usize)>> = BTreeMap::new();
    for (doc, nodes) in workflows.iter().zip(&per_workflow) {
        let keys: Vec<String> = match grouping {
            Grouping::Overall => vec![OVERALL.to_string()],
            Grouping::Benchmark => vec![doc.benchmark.clone()],
            Grouping::Agent => vec![doc.agent.clone()],
            Grouping::Model => vec![doc.model.clone()],
            Grouping::DomainFamily | Grouping::SkillCategory => {
                let found = doc
                    .example_key()
                    .map(|k| attribution.expect("checked above").groups(grouping, &k).to_vec())
                    .unwrap_or_default();
                if found.is_empty() {
                    vec![UNATTRIBUTED.to_string()]
                } else {
                    found
                }
            }
        };
        let keys: Vec<String> =
            keys.into_iter().map(|k| if k.trim().is_empty() { UNATTRIBUTED.to_string() } else { k }).collect();
        for key in keys {
            let levels = groups.entry(key).or_default();
            for n in nodes {
                let e = levels.entry(n.complexity).or_default();
                e.0 += usize::from(n.status);
                e.1 += 1;
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(group, counts)| {
            let label = attribution.and_then(|a| a.label(&group)).unwrap_or(&group).to_string();
            AutonomyCurve::from_counts(grouping, group, label, counts)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceMode {
    /// SR(k) itself, with the minimum-sample filter.
    #[default]
    Raw,
    /// Wilson lower bound on SR(k), with the minimum-sample filter.
    Lcb,
}

impl ConfidenceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfidenceMode::Raw => "raw",
            ConfidenceMode::Lcb => "lcb",
        }
    }
}

impl FromStr for ConfidenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "raw" => Ok(ConfidenceMode::Raw),
            "lcb" => Ok(ConfidenceMode::Lcb),
            other => Err(format!("unknown confidence mode `{other}` (expected raw or lcb)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutonomyParams<S> {
    pub threshold: S,
    pub min_samples: usize,
    pub mode: ConfidenceMode,
}

impl<S: Scalar> AutonomyParams<S> {
    pub fn new(threshold: S, min_samples: usize, mode: ConfidenceMode) -> Result<Self, AutonomyError> {
        if !(threshold > S::zero() && threshold <= S::one()) {
            return Err(AutonomyError::Threshold);
        }
        if min_samples == 0 {
            return Err(AutonomyError::MinSamples);
        }
        Ok(AutonomyParams { threshold, min_samples, mode })
    }

    /// Whether a level clears the threshold, ignoring sample counts.
    fn meets(&self, stats: &LevelStats<S>) -> bool {
        match self.mode {
            ConfidenceMode::Raw => stats.sr >= self.threshold,
            ConfidenceMode::Lcb => stats.lcb >= self.threshold.to_f64_lossy(),
        }
    }

    /// Whether a level clears the threshold with enough samples.
    pub fn passes(&self, stats: &LevelStats<S>) -> bool {
        stats.totals >= self.min_samples && self.meets(stats)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutonomyLevel {
    /// `None` when no level qualifies.
    pub level: Option<usize>,
    /// Levels below `level` that miss the threshold.
    pub non_monotonic: Vec<usize>,
}

impl fmt::Display for AutonomyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.level {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("none"),
        }
    }
}

/// Largest qualifying level, not the end of the longest passing prefix.
pub fn autonomy_level<S: Scalar>(curve: &AutonomyCurve<S>, params: &AutonomyParams<S>) -> AutonomyLevel {
    let level = curve.levels.iter().filter(|(_, s)| params.passes(s)).map(|(k, _)| *k).max();
    let non_monotonic = match level {
        Some(a) => curve.levels.range(..a).filter(|(_, s)| !params.meets(s)).map(|(k, _)| *k).collect(),
        None => Vec::new(),
    };
    AutonomyLevel { level, non_monotonic }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingJudgment {
    pub shallow: String,
    pub deep: String,
    pub shallow_level: usize,
    /// Whether the deeper task was shown first.
    pub deep_first: bool,
    /// `Some(true)` when the judge picked the deeper task; `None` when the
    /// verdict could not be read.
    pub verdict: Option<bool>,
    pub judge_id: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport<S> {
    pub judgments: Vec<OrderingJudgment>,
    pub affirmed: usize,
    pub judged: usize,
    pub unparseable: usize,
    /// `affirmed / judged`; `None` when nothing could be judged.
    pub fraction: Option<S>,
}

fn parse_choice(raw: &str) -> Option<bool> {
    let t = raw.trim().trim_start_matches(['*', '"', '(', '`']);
    let end = t.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(t.len());
    match &t[..end] {
        "A" => Some(true),
        "B" => Some(false),
        _ => None,
    }
}

/// Asks the judge which of two tasks at adjacent complexity levels is more
/// complex. Levels are drawn uniformly among adjacent pairs present in the
/// corpus, then one node per level. Presentation order is randomized.
pub fn validate_ordering<S: Scalar, A: Annotator + ?Sized>(
    workflows: &[WorkflowDoc],
    pair_count: usize,
    judge: &A,
    policy: RetryPolicy,
    seed: u64,
) -> Result<OrderingReport<S>, AutonomyError> {
    let mut by_level: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for doc in workflows {
        for n in doc.complexity()? {
            if !n.description.trim().is_empty() {
                by_level.entry(n.complexity).or_default().push(n.description);
            }
        }
    }
    let adjacent: Vec<usize> = by_level.keys().copied().filter(|k| by_level.contains_key(&(k + 1))).collect();
    if adjacent.is_empty() {
        return Err(AutonomyError::NoAdjacentPairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut judgments = Vec::with_capacity(pair_count);
    for i in 0..pair_count {
        let k = *adjacent.choose(&mut rng).expect("non-empty");
        let shallow = by_level[&k].choose(&mut rng).expect("non-empty").clone();
        let deep = by_level[&(k + 1)].choose(&mut rng).expect("non-empty").clone();
        let deep_first = rng.gen_bool(0.5);
        let (first, second) = if deep_first { (deep.clone(), shallow.clone()) } else { (shallow.clone(), deep.clone()) };
        let request = AnnotationRequest {
            key: format!("ordering/{seed}/{i}"),
            task: AnnotationTask::OrderingJudge { first, second },
        };
        let raw = annotate_with_retry(judge, &request, policy)?;
        let verdict = parse_choice(&raw).map(|picked_first| picked_first == deep_first);
        judgments.push(OrderingJudgment {
            shallow,
            deep,
            shallow_level: k,
            deep_first,
            verdict,
            judge_id: judge.id().to_string(),
            raw,
        });
    }
    let affirmed = judgments.iter().filter(|j| j.verdict == Some(true)).count();
    let judged = judgments.iter().filter(|j| j.verdict.is_some()).count();
    Ok(OrderingReport {
        unparseable: judgments.len() - judged,
        fraction: (judged > 0).then(|| S::ratio(affirmed, judged)),
        affirmed,
        judged,
        judgments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    DelegateEndToEnd,
    Decompose,
    InsufficientData,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::DelegateEndToEnd => "delegate_end_to_end",
            Decision::Decompose => "decompose",
            Decision::InsufficientData => "insufficient_data",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsultedCurve<S> {
    pub group: String,
    pub group_label: String,
    /// Stats at the estimated complexity, if that level was observed.
    pub at_estimate: Option<LevelStats<S>>,
    pub passes: bool,
    /// Highest passing level below the estimate.
    pub best_lower: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutonomyAdvice<S> {
    pub task: ExampleKey,
    pub matched_groups: Vec<String>,
    pub estimated_complexity: usize,
    pub threshold: S,
    pub decision: Decision,
    pub consulted: Vec<ConsultedCurve<S>>,
}

/// Groups of a task under a domain or skill grouping, from its mapping.
pub fn task_groups(result: &MappingResult, grouping: Grouping) -> Vec<String> {
    let level = match (grouping, result.taxonomy_kind) {
        (Grouping::DomainFamily, TaxonomyKind::Domain) => 1,
        (Grouping::SkillCategory, TaxonomyKind::Skill) => 2,
        _ => return Vec::new(),
    };
    let mut out: Vec<String> = Vec::new();
    for p in &result.paths {
        if let Some(id) = p.id_at_level(level) {
            if !out.iter().any(|g| g == id) {
                out.push(id.to_string());
            }
        }
    }
    out
}

/// Decides whether a task at `complexity` can be handed over whole.
/// Only curves whose group is in `matched_groups` are consulted.
pub fn advise<S: Scalar>(
    task: ExampleKey,
    matched_groups: &[String],
    complexity: usize,
    curves: &[AutonomyCurve<S>],
    params: &AutonomyParams<S>,
) -> Result<AutonomyAdvice<S>, AutonomyError> {
    let consulted: Vec<ConsultedCurve<S>> = matched_groups
        .iter()
        .filter_map(|g| curves.iter().find(|c| &c.group == g))
        .map(|c| {
            let at_estimate = c.levels.get(&complexity).cloned();
            ConsultedCurve {
                group: c.group.clone(),
                group_label: c.group_label.clone(),
                passes: at_estimate.as_ref().is_some_and(|s| params.passes(s)),
                at_estimate,
                best_lower: c.levels.range(..complexity).filter(|(_, s)| params.passes(s)).map(|(k, _)| *k).max(),
            }
        })
        .collect();
    if consulted.is_empty() {
        return Err(AutonomyError::NoMatchedGroups(matched_groups.to_vec()));
    }
    let decision = if consulted.iter().all(|c| c.passes) {
        Decision::DelegateEndToEnd
    } else if consulted.iter().any(|c| c.best_lower.is_some()) {
        Decision::Decompose
    } else {
        Decision::InsufficientData
    };
    Ok(AutonomyAdvice {
        task,
        matched_groups: matched_groups.to_vec(),
        estimated_complexity: complexity,
        threshold: params.threshold,
        decision,
        consulted,
    })
}

/// Writes `group,level,successes,totals,sr,lcb` rows.
pub fn write_curves_csv<S: Scalar>(writer: impl std::io::Write, curves: &[AutonomyCurve<S>]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "level", "successes", "totals", "sr", "lcb"])?;
    for c in curves {
        for (k, s) in &c.levels {
            w.write_record([
                c.group.clone(),
                k.to_string(),
                s.successes.to_string(),
                s.totals.to_string(),
                format!("{:.6}", s.sr.to_f64_lossy()),
                format!("{:.6}", s.lcb),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
