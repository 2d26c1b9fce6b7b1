//! Coverage-aware batch sampling, permutation sensitivity and Chao1.
//!
//! Batches are consumed in pool order. After each batch the coverage gain
//! on both taxonomies is measured; sampling stops after the first batch
//! whose gain is below `delta` under the configured [`StopCriterion`], or
//! when the pool runs out.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{CoverageError, CoverageTracker};
use crate::mapping::{ExampleKey, MappingResult, MappingStatus};
use crate::scalar::Scalar;
use crate::taxonomy::{Taxonomy, TaxonomyKind};

pub const DEFAULT_BATCH_SIZE: usize = 5;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_PERMUTATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplerError {
    #[error("batch size must be at least 1")]
    BatchSize,
    #[error("delta must be positive")]
    Delta,
    #[error("sampling pool is empty")]
    EmptyPool,
    #[error("at least one permutation is required")]
    Permutations,
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Chao1Error {
    #[error("no observations")]
    NoObservations,
    #[error("observed counts must be at least 1")]
    ZeroCount,
}

/// One example's mapped path indices in both taxonomies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolItem {
    pub example: ExampleKey,
    pub domain: Vec<usize>,
    pub skill: Vec<usize>,
}

/// Joins domain and skill mapping results per example, in order of first
/// appearance. Examples without a mapped result in a taxonomy contribute no
/// paths there but stay in the pool.
pub fn build_pool(
    results: &[MappingResult],
    domain: &Taxonomy,
    skill: &Taxonomy,
) -> Result<Vec<PoolItem>, CoverageError> {
    let mut order: Vec<PoolItem> = Vec::new();
    let mut position: HashMap<ExampleKey, usize> = HashMap::new();
    for r in results {
        let taxonomy = match r.taxonomy_kind {
            TaxonomyKind::Domain => domain,
            TaxonomyKind::Skill => skill,
        };
        let idx = *position.entry(r.example.clone()).or_insert_with(|| {
            order.push(PoolItem { example: r.example.clone(), domain: Vec::new(), skill: Vec::new() });
            order.len() - 1
        });
        if r.status != MappingStatus::Mapped {
            continue;
        }
        for p in &r.paths {
            let i = taxonomy
                .path_index(p)
                .filter(|_| p.taxonomy_kind == taxonomy.kind())
                .ok_or_else(|| CoverageError::ForeignPath {
                    example: r.example.clone(),
                    path: p.clone(),
                    kind: taxonomy.kind(),
                })?;
            let slot = match r.taxonomy_kind {
                TaxonomyKind::Domain => &mut order[idx].domain,
                TaxonomyKind::Skill => &mut order[idx].skill,
            };
            if !slot.contains(&i) {
                slot.push(i);
            }
        }
    }
    Ok(order)
}

/// Deterministic shuffle of the pool.
pub fn shuffle_pool(pool: &[PoolItem], seed: u64) -> Vec<PoolItem> {
    let mut v = pool.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// Which taxonomies must fall below `delta` for sampling to stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    #[default]
    Both,
    Either,
    Domain,
    Skill,
}

/// Unit in which the per-batch coverage gain is compared with `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainUnit {
    /// Percentage points of coverage.
    #[default]
    PercentagePoints,
    /// Fraction of the taxonomy, in [0, 1].
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams<S> {
    pub batch_size: usize,
    pub delta: S,
    pub criterion: StopCriterion,
    pub unit: GainUnit,
}

impl<S: Scalar> SamplingParams<S> {
    pub fn new(batch_size: usize, delta: S) -> Self {
        SamplingParams { batch_size, delta, criterion: StopCriterion::Both, unit: GainUnit::PercentagePoints }
    }

    fn validate(&self) -> Result<(), SamplerError> {
        if self.batch_size == 0 {
            return Err(SamplerError::BatchSize);
        }
        if !(self.delta > S::zero()) {
            return Err(SamplerError::Delta);
        }
        Ok(())
    }

    fn gain(&self, new_paths: usize, total: usize) -> S {
        if total == 0 {
            return S::zero();
        }
        match self.unit {
            GainUnit::PercentagePoints => S::ratio(new_paths * 100, total),
            GainUnit::Fraction => S::ratio(new_paths, total),
        }
    }

    fn saturated(&self, gain: &PerKind<S>) -> bool {
        let low_d = gain.domain < self.delta;
        let low_s = gain.skill < self.delta;
        match self.criterion {
            StopCriterion::Both => low_d && low_s,
            StopCriterion::Either => low_d || low_s,
            StopCriterion::Domain => low_d,
            StopCriterion::Skill => low_s,
        }
    }
}

impl Default for SamplingParams<f64> {
    fn default() -> Self {
        SamplingParams::new(DEFAULT_BATCH_SIZE, DEFAULT_DELTA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerKind<T> {
    pub domain: T,
    pub skill: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Saturated,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingRun<S> {
    pub selected: Vec<ExampleKey>,
    pub batch_size: usize,
    pub delta: S,
    /// Zero-based index of the last consumed batch.
    pub stop_batch_index: usize,
    pub stop_reason: StopReason,
    /// Coverage (fraction) after each batch.
    pub coverage_trace: Vec<PerKind<S>>,
    /// Gain of each batch in the configured unit.
    pub gains: Vec<PerKind<S>>,
    /// Occurrences of each covered path index among the selected examples.
    pub path_counts: PerKind<HashMap<usize, usize>>,
    pub total_paths: PerKind<usize>,
    /// Seed of the shuffle applied before batching, if any.
    pub seed: Option<u64>,
}

impl<S: Scalar> SamplingRun<S> {
    pub fn final_coverage(&self) -> PerKind<S> {
        self.coverage_trace.last().copied().unwrap_or(PerKind { domain: S::zero(), skill: S::zero() })
    }

    /// Chao1-extrapolated coverage at the stop, capped at 1. `None` when
    /// nothing was observed.
    pub fn chao1_coverage(&self) -> PerKind<Option<S>> {
        let est = |counts: &HashMap<usize, usize>, total: usize| {
            chao1::<S>(counts.values().copied())
                .ok()
                .map(|e| e.min_of(S::from_count(total)) / S::from_count(total.max(1)))
        };
        PerKind {
            domain: est(&self.path_counts.domain, self.total_paths.domain),
            skill: est(&self.path_counts.skill, self.total_paths.skill),
        }
    }
}

/// Runs the batch-wise stopping rule over `pool` in the given order, or
/// after a seeded shuffle when `seed` is set.
pub fn sample_until_saturation<S: Scalar>(
    pool: &[PoolItem],
    domain: &Taxonomy,
    skill: &Taxonomy,
    params: &SamplingParams<S>,
    seed: Option<u64>,
) -> Result<SamplingRun<S>, SamplerError> {
    params.validate()?;
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    let shuffled;
    let ordered = match seed {
        Some(s) => {
            shuffled = shuffle_pool(pool, s);
            &shuffled[..]
        }
        None => pool,
    };
    Ok(replay(ordered, PerKind { domain: domain.path_count(), skill: skill.path_count() }, params, seed))
}

fn replay<S: Scalar>(pool: &[PoolItem], totals: PerKind<usize>, params: &SamplingParams<S>, seed: Option<u64>) -> SamplingRun<S> {
    let mut trackers = PerKind { domain: CoverageTracker::new(totals.domain), skill: CoverageTracker::new(totals.skill) };
    let mut counts: PerKind<HashMap<usize, usize>> = PerKind::default();
    let mut selected = Vec::new();
    let mut trace = Vec::new();
    let mut gains = Vec::new();
    let mut stop_reason = StopReason::Exhausted;

    for batch in pool.chunks(params.batch_size) {
        let mut fresh = PerKind { domain: 0usize, skill: 0usize };
        for item in batch {
            selected.push(item.example.clone());
            for &i in &item.domain {
                fresh.domain += trackers.domain.insert(i) as usize;
                *counts.domain.entry(i).or_default() += 1;
            }
            for &i in &item.skill {
                fresh.skill += trackers.skill.insert(i) as usize;
                *counts.skill.entry(i).or_default() += 1;
            }
        }
        let gain = PerKind {
            domain: params.gain(fresh.domain, totals.domain),
            skill: params.gain(fresh.skill, totals.skill),
        };
        trace.push(PerKind { domain: trackers.domain.fraction(), skill: trackers.skill.fraction() });
        gains.push(gain);
        if params.saturated(&gain) {
            stop_reason = StopReason::Saturated;
            break;
        }
    }

    SamplingRun {
        selected,
        batch_size: params.batch_size,
        delta: params.delta,
        stop_batch_index: trace.len() - 1,
        stop_reason,
        coverage_trace: trace,
        gains,
        path_counts: counts,
        total_paths: totals,
        seed,
    }
}

/// Chao1 richness estimate from per-category occurrence counts.
///
/// `S_obs + f1² / (2 f2)` when doubletons exist, otherwise the
/// bias-corrected `S_obs + f1 (f1 − 1) / (2 (f2 + 1))`.
pub fn chao1<S: Scalar>(counts: impl IntoIterator<Item = usize>) -> Result<S, Chao1Error> {
    let (mut s_obs, mut f1, mut f2) = (0usize, 0usize, 0usize);
    for c in counts {
        match c {
            0 => return Err(Chao1Error::ZeroCount),
            1 => f1 += 1,
            2 => f2 += 1,
            _ => {}
        }
        s_obs += 1;
    }
    if s_obs == 0 {
        return Err(Chao1Error::NoObservations);
    }
    let extra = if f2 > 0 {
        S::ratio(f1 * f1, 2 * f2)
    } else {
        S::ratio(f1 * f1.saturating_sub(1), 2 * (f2 + 1))
    };
    Ok(S::from_count(s_obs) + extra)
}

/// Chao1 over a map of category → count.
pub fn chao1_from_map<K, S: Scalar>(counts: &HashMap<K, usize>) -> Result<S, Chao1Error> {
    chao1(counts.values().copied())
}

/// Empirical distribution summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// 2.5th percentile.
    pub lo: f64,
    /// 97.5th percentile.
    pub hi: f64,
    /// Normal-approximation 95% interval of the mean.
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub min: f64,
    pub max: f64,
}

/// Percentile by linear interpolation between order statistics. `sorted`
/// must be non-empty and ascending; `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Distribution {
    /// Returns `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let half = 1.959963984540054 * (var / n as f64).sqrt();
        Some(Distribution {
            n,
            mean,
            median: percentile(&sorted, 0.5),
            lo: percentile(&sorted, 0.025),
            hi: percentile(&sorted, 0.975),
            mean_lo: mean - half,
            mean_hi: mean + half,
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationRun<S> {
    pub seed: u64,
    pub stop_size: usize,
    pub stop_reason: StopReason,
    pub coverage: PerKind<S>,
    pub chao1_coverage: PerKind<Option<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySummary<S> {
    pub permutations: usize,
    pub pool_size: usize,
    pub seed: u64,
    pub runs: Vec<PermutationRun<S>>,
    pub stop_size: Distribution,
    pub coverage: PerKind<Distribution>,
    /// `None` when no run observed any path in that taxonomy.
    pub chao1_coverage: PerKind<Option<Distribution>>,
    /// Coverage of the whole pool, the ceiling for every run.
    pub pool_coverage: PerKind<S>,
}

/// Per-permutation sub-seeds derived from `seed`.
pub fn derive_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Replays the stopping rule over `permutations` independent shuffles of
/// the pool. Replays run in parallel; results are ordered by permutation.
pub fn permutation_sensitivity<S: Scalar>(
    pool: &[PoolItem],
    domain: &Taxonomy,
    skill: &Taxonomy,
    params: &SamplingParams<S>,
    permutations: usize,
    seed: u64,
) -> Result<SensitivitySummary<S>, SamplerError> {
    params.validate()?;
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    if permutations == 0 {
        return Err(SamplerError::Permutations);
    }
    let totals = PerKind { domain: domain.path_count(), skill: skill.path_count() };
    let runs: Vec<PermutationRun<S>> = derive_seeds(seed, permutations)
        .into_par_iter()
        .map(|sub| {
            let order = shuffle_pool(pool, sub);
            let run = replay(&order, totals, params, Some(sub));
            PermutationRun {
                seed: sub,
                stop_size: run.selected.len(),
                stop_reason: run.stop_reason,
                coverage: run.final_coverage(),
                chao1_coverage: run.chao1_coverage(),
            }
        })
        .collect();

    let pool_coverage = pool_coverage::<S>(pool, totals);

    let dist = |f: &dyn Fn(&PermutationRun<S>) -> f64| {
        Distribution::from_values(&runs.iter().map(f).collect::<Vec<_>>()).expect("at least one run")
    };
    let opt_dist = |f: &dyn Fn(&PermutationRun<S>) -> Option<f64>| {
        Distribution::from_values(&runs.iter().filter_map(f).collect::<Vec<_>>())
    };
    Ok(SensitivitySummary {
        permutations,
        pool_size: pool.len(),
        seed,
        stop_size: dist(&|r| r.stop_size as f64),
        coverage: PerKind {
            domain: dist(&|r| r.coverage.domain.to_f64_lossy()),
            skill: dist(&|r| r.coverage.skill.to_f64_lossy()),
        },
        chao1_coverage: PerKind {
            domain: opt_dist(&|r| r.chao1_coverage.domain.map(Scalar::to_f64_lossy)),
            skill: opt_dist(&|r| r.chao1_coverage.skill.map(Scalar::to_f64_lossy)),
        },
        pool_coverage,
        runs,
    })
}

fn pool_coverage<S: Scalar>(pool: &[PoolItem], totals: PerKind<usize>) -> PerKind<S> {
    let mut d = CoverageTracker::new(totals.domain);
    let mut s = CoverageTracker::new(totals.skill);
    for item in pool {
        item.domain.iter().for_each(|&i| {
            d.insert(i);
        });
        item.skill.iter().for_each(|&i| {
            s.insert(i);
        });
    }
    PerKind { domain: d.fraction(), skill: s.fraction() }
}
