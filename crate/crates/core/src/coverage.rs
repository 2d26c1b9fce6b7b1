//! Taxonomy coverage, effort distributions and per-example breadth.
//!
//! All functions take a corpus of mapping results and ignore results whose
//! taxonomy kind differs from the taxonomy they are given, so a mixed
//! domain+skill corpus can be passed to both.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{ExampleKey, MappingResult, MappingStatus};
use crate::scalar::Scalar;
use crate::taxonomy::{Taxonomy, TaxonomyKind, TaxonomyPath, PATH_DEPTH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("{example}: path {path} is not part of the {kind} taxonomy")]
    ForeignPath { example: ExampleKey, path: TaxonomyPath, kind: TaxonomyKind },
    #[error("grouping level {level:?} does not apply to a {kind} taxonomy")]
    LevelMismatch { level: GroupLevel, kind: TaxonomyKind },
}

/// Set of covered path indices, updated one path at a time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageTracker {
    covered: Vec<bool>,
    count: usize,
}

impl CoverageTracker {
    pub fn new(total_paths: usize) -> Self {
        CoverageTracker { covered: vec![false; total_paths], count: 0 }
    }

    /// Marks a path index; returns whether it was new.
    pub fn insert(&mut self, index: usize) -> bool {
        let fresh = !self.covered[index];
        if fresh {
            self.covered[index] = true;
            self.count += 1;
        }
        fresh
    }

    pub fn covered_count(&self) -> usize {
        self.count
    }

    pub fn total(&self) -> usize {
        self.covered.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.covered[index]
    }

    pub fn fraction<S: Scalar>(&self) -> S {
        if self.covered.is_empty() {
            S::zero()
        } else {
            S::ratio(self.count, self.covered.len())
        }
    }

    /// Union with another tracker over the same taxonomy.
    pub fn merge(&mut self, other: &CoverageTracker) {
        assert_eq!(self.covered.len(), other.covered.len(), "trackers over different taxonomies");
        for (i, &c) in other.covered.iter().enumerate() {
            if c {
                self.insert(i);
            }
        }
    }
}

fn path_indices<'a>(
    result: &'a MappingResult,
    taxonomy: &'a Taxonomy,
) -> impl Iterator<Item = Result<usize, CoverageError>> + 'a {
    result.paths.iter().map(move |p| {
        if p.taxonomy_kind != taxonomy.kind() {
            return Err(CoverageError::ForeignPath {
                example: result.example.clone(),
                path: p.clone(),
                kind: taxonomy.kind(),
            });
        }
        taxonomy.path_index(p).ok_or_else(|| CoverageError::ForeignPath {
            example: result.example.clone(),
            path: p.clone(),
            kind: taxonomy.kind(),
        })
    })
}

fn relevant<'a>(results: &'a [MappingResult], taxonomy: &'a Taxonomy) -> impl Iterator<Item = &'a MappingResult> + 'a {
    results.iter().filter(move |r| r.taxonomy_kind == taxonomy.kind())
}

/// Checks that every path of every relevant result belongs to `taxonomy`.
pub fn check_paths(results: &[MappingResult], taxonomy: &Taxonomy) -> Result<(), CoverageError> {
    for r in relevant(results, taxonomy) {
        for idx in path_indices(r, taxonomy) {
            idx?;
        }
    }
    Ok(())
}

/// Adds the paths of one result to a tracker.
pub fn track_result(tracker: &mut CoverageTracker, result: &MappingResult, taxonomy: &Taxonomy) -> Result<usize, CoverageError> {
    let mut fresh = 0;
    if result.taxonomy_kind != taxonomy.kind() || result.status != MappingStatus::Mapped {
        return Ok(0);
    }
    for idx in path_indices(result, taxonomy) {
        if tracker.insert(idx?) {
            fresh += 1;
        }
    }
    Ok(fresh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport<S> {
    pub taxonomy_kind: TaxonomyKind,
    pub covered_paths: BTreeSet<TaxonomyPath>,
    pub total_paths: usize,
    pub coverage: S,
    /// Each benchmark's own covered paths over the full taxonomy.
    pub per_benchmark: BTreeMap<String, S>,
    pub per_benchmark_covered: BTreeMap<String, usize>,
}

/// Fraction of the taxonomy's paths touched by at least one mapped result.
pub fn coverage<S: Scalar>(results: &[MappingResult], taxonomy: &Taxonomy) -> Result<CoverageReport<S>, CoverageError> {
    let total = taxonomy.path_count();
    let mut pooled = CoverageTracker::new(total);
    let mut per_bench: BTreeMap<String, CoverageTracker> = BTreeMap::new();
    for r in relevant(results, taxonomy) {
        let tracker = per_bench.entry(r.example.benchmark.clone()).or_insert_with(|| CoverageTracker::new(total));
        track_result(tracker, r, taxonomy)?;
    }
    for t in per_bench.values() {
        pooled.merge(t);
    }
    let covered_paths = taxonomy
        .all_paths()
        .iter()
        .enumerate()
        .filter(|(i, _)| pooled.contains(*i))
        .map(|(_, p)| p.clone())
        .collect();
    Ok(CoverageReport {
        taxonomy_kind: taxonomy.kind(),
        covered_paths,
        total_paths: total,
        coverage: pooled.fraction(),
        per_benchmark_covered: per_bench.iter().map(|(b, t)| (b.clone(), t.covered_count())).collect(),
        per_benchmark: per_bench.into_iter().map(|(b, t)| (b, t.fraction())).collect(),
    })
}

/// Coverage counted on distinct nodes at one level (1 = top-level
/// categories, 3 = leaves, equal to path coverage).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCoverage<S> {
    pub taxonomy_kind: TaxonomyKind,
    pub level: usize,
    pub covered_nodes: BTreeSet<String>,
    pub total_nodes: usize,
    pub coverage: S,
    pub per_benchmark: BTreeMap<String, S>,
    pub per_benchmark_covered: BTreeMap<String, usize>,
}

pub fn level_coverage<S: Scalar>(
    results: &[MappingResult],
    taxonomy: &Taxonomy,
    level: usize,
) -> Result<LevelCoverage<S>, CoverageError> {
    check_paths(results, taxonomy)?;
    let total_nodes = taxonomy.nodes_at_level(level).count();
    let frac = |n: usize| if total_nodes == 0 { S::zero() } else { S::ratio(n, total_nodes) };
    let mut pooled = BTreeSet::new();
    let mut per: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in relevant(results, taxonomy) {
        let entry = per.entry(r.example.benchmark.clone()).or_default();
        for p in &r.paths {
            if let Some(id) = p.id_at_level(level) {
                entry.insert(id.to_string());
                pooled.insert(id.to_string());
            }
        }
    }
    Ok(LevelCoverage {
        taxonomy_kind: taxonomy.kind(),
        level,
        coverage: frac(pooled.len()),
        covered_nodes: pooled,
        total_nodes,
        per_benchmark_covered: per.iter().map(|(b, s)| (b.clone(), s.len())).collect(),
        per_benchmark: per.into_iter().map(|(b, s)| (b, frac(s.len()))).collect(),
    })
}

/// Node level at which examples are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLevel {
    /// Top-level job family of the domain taxonomy.
    DomainFamily,
    /// Fine-grained work activity (leaf) of the skill taxonomy.
    SkillLeaf,
}

impl GroupLevel {
    pub fn kind(self) -> TaxonomyKind {
        match self {
            GroupLevel::DomainFamily => TaxonomyKind::Domain,
            GroupLevel::SkillLeaf => TaxonomyKind::Skill,
        }
    }

    /// Depth of the grouping nodes below the root.
    pub fn depth(self) -> usize {
        match self {
            GroupLevel::DomainFamily => 1,
            GroupLevel::SkillLeaf => PATH_DEPTH,
        }
    }

    pub fn for_kind(kind: TaxonomyKind) -> Self {
        match kind {
            TaxonomyKind::Domain => GroupLevel::DomainFamily,
            TaxonomyKind::Skill => GroupLevel::SkillLeaf,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupLevel::DomainFamily => "domain_family",
            GroupLevel::SkillLeaf => "skill_leaf",
        }
    }
}

fn nodes_per_example(
    results: &[MappingResult],
    taxonomy: &Taxonomy,
    level: GroupLevel,
) -> Result<BTreeMap<ExampleKey, BTreeSet<String>>, CoverageError> {
    if level.kind() != taxonomy.kind() {
        return Err(CoverageError::LevelMismatch { level, kind: taxonomy.kind() });
    }
    check_paths(results, taxonomy)?;
    let mut per: BTreeMap<ExampleKey, BTreeSet<String>> = BTreeMap::new();
    for r in relevant(results, taxonomy) {
        let nodes = per.entry(r.example.clone()).or_default();
        for p in &r.paths {
            if let Some(id) = p.id_at_level(level.depth()) {
                nodes.insert(id.to_string());
            }
        }
    }
    Ok(per)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffortDistribution {
    pub group_level: GroupLevel,
    /// Node id → number of examples reaching that node. Every node at the
    /// grouping level is present, possibly with a zero count.
    pub counts: BTreeMap<String, usize>,
    pub total_examples: usize,
}

impl EffortDistribution {
    pub fn total_incidences(&self) -> usize {
        self.counts.values().sum()
    }

    /// Count share of each node among all incidences.
    pub fn shares<S: Scalar>(&self) -> BTreeMap<String, S> {
        let total = self.total_incidences();
        self.counts
            .iter()
            .map(|(k, &c)| (k.clone(), if total == 0 { S::zero() } else { S::ratio(c, total) }))
            .collect()
    }
}

/// Counts, per node at the grouping level, how many examples reach it.
/// An example adds at most one to each node however many paths it has there.
pub fn effort_by_node(
    results: &[MappingResult],
    taxonomy: &Taxonomy,
    level: GroupLevel,
) -> Result<EffortDistribution, CoverageError> {
    let per = nodes_per_example(results, taxonomy, level)?;
    let mut counts: BTreeMap<String, usize> =
        taxonomy.nodes_at_level(level.depth()).map(|n| (n.id().to_string(), 0)).collect();
    for nodes in per.values() {
        for n in nodes {
            *counts.entry(n.clone()).or_default() += 1;
        }
    }
    Ok(EffortDistribution { group_level: level, counts, total_examples: per.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreadthStats<S> {
    pub group_level: GroupLevel,
    pub per_example: BTreeMap<ExampleKey, usize>,
    /// breadth → number of examples.
    pub histogram: BTreeMap<usize, usize>,
    pub total_examples: usize,
    /// Mean over all examples, zero-breadth ones included.
    pub mean: S,
    /// Mean over examples with breadth ≥ 1.
    pub mean_nonzero: S,
    pub share_zero: S,
    pub share_one: S,
    pub share_above_one: S,
    pub share_above_three: S,
    pub share_four_or_more: S,
}

/// Distinct nodes per example at the grouping level.
pub fn breadth<S: Scalar>(
    results: &[MappingResult],
    taxonomy: &Taxonomy,
    level: GroupLevel,
) -> Result<BreadthStats<S>, CoverageError> {
    let per = nodes_per_example(results, taxonomy, level)?;
    let per_example: BTreeMap<ExampleKey, usize> = per.into_iter().map(|(k, v)| (k, v.len())).collect();
    let mut histogram = BTreeMap::new();
    for &b in per_example.values() {
        *histogram.entry(b).or_insert(0) += 1;
    }
    let n = per_example.len();
    let share = |pred: &dyn Fn(usize) -> bool| {
        if n == 0 {
            S::zero()
        } else {
            S::ratio(per_example.values().filter(|&&b| pred(b)).count(), n)
        }
    };
    let sum: usize = per_example.values().sum();
    let nonzero = per_example.values().filter(|&&b| b > 0).count();
    Ok(BreadthStats {
        group_level: level,
        total_examples: n,
        mean: if n == 0 { S::zero() } else { S::ratio(sum, n) },
        mean_nonzero: if nonzero == 0 { S::zero() } else { S::ratio(sum, nonzero) },
        share_zero: share(&|b| b == 0),
        share_one: share(&|b| b == 1),
        share_above_one: share(&|b| b > 1),
        share_above_three: share(&|b| b > 3),
        share_four_or_more: share(&|b| b >= 4),
        histogram,
        per_example,
    })
}
