//! Place agent-benchmark examples in occupational domain and skill
//! taxonomies and measure what they cover.
//!
//! Numeric results are generic over [`Scalar`]: `f64`, `f32` or the exact
//! rational [`Exact`]. The aliases below fix the scalar for common use.

pub mod annotator;
pub mod autonomy;
pub mod coverage;
pub mod economics;
pub mod mapping;
pub mod sampler;
pub mod scalar;
pub mod taxonomy;

pub use annotator::{Annotator, KeywordAnnotator, RemoteAnnotator, ReplayAnnotator, RetryPolicy, TransportError};
pub use autonomy::{ConfidenceMode, Decision, Grouping, WorkflowDoc, WorkflowNode};
pub use coverage::{CoverageTracker, EffortDistribution, GroupLevel};
pub use economics::{DigitalClass, DigitalLabel};
pub use mapping::{ExampleKey, MappingResult, MappingStatus, TaskExample};
pub use sampler::{PoolItem, StopCriterion};
pub use scalar::{Exact, ParseScalar, Scalar};
pub use taxonomy::{Taxonomy, TaxonomyKind, TaxonomyPath};

pub type CoverageReportF64 = coverage::CoverageReport<f64>;
pub type BreadthStatsF64 = coverage::BreadthStats<f64>;
pub type SamplingParamsF64 = sampler::SamplingParams<f64>;
pub type SamplingRunF64 = sampler::SamplingRun<f64>;
pub type SensitivitySummaryF64 = sampler::SensitivitySummary<f64>;
pub type OccupationStatsF64 = economics::OccupationStats<f64>;
pub type EconTableF64 = economics::EconTable<f64>;
pub type AlignmentRowF64 = economics::AlignmentRow<f64>;
pub type AutonomyCurveF64 = autonomy::AutonomyCurve<f64>;
pub type AutonomyParamsF64 = autonomy::AutonomyParams<f64>;
pub type AutonomyAdviceF64 = autonomy::AutonomyAdvice<f64>;

pub type ExactCoverageReport = coverage::CoverageReport<Exact>;
pub type ExactBreadthStats = coverage::BreadthStats<Exact>;
pub type ExactSamplingRun = sampler::SamplingRun<Exact>;
pub type ExactEconTable = economics::EconTable<Exact>;
pub type ExactAlignmentRow = economics::AlignmentRow<Exact>;
pub type ExactAutonomyCurve = autonomy::AutonomyCurve<Exact>;
