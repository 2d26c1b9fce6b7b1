use std::path::{Path, PathBuf};

use atlas_core::autonomy::{ConfidenceMode, Grouping, DEFAULT_MIN_SAMPLES, DEFAULT_THRESHOLD};
use atlas_core::sampler::{DEFAULT_BATCH_SIZE, DEFAULT_DELTA, DEFAULT_PERMUTATIONS};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_PARALLELISM: usize = 4;
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(
    name = "atlas",
    version,
    about = "Map benchmark tasks onto occupational taxonomies and measure coverage, labor-market alignment and agent autonomy",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub options: Options,

    /// TOML file whose keys mirror the long flags (snake_case). Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Map examples onto both taxonomies with an annotator.
    Map,
    /// Coverage, effort and breadth tables from recorded mappings.
    Coverage,
    /// Coverage-aware sampling and permutation sensitivity per benchmark.
    Sample,
    /// Employment, capital, digital shares and effort alignment.
    Economics,
    /// Success-rate curves and autonomy levels from workflows.
    Autonomy,
    /// Delegate-or-decompose advice for one task.
    Advise(AdviseArgs),
    /// Every analysis the supplied inputs allow, in one bundle.
    Report,
    /// Cross-check the supplied input files without computing anything.
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Map => "map",
            Command::Coverage => "coverage",
            Command::Sample => "sample",
            Command::Economics => "economics",
            Command::Autonomy => "autonomy",
            Command::Advise(_) => "advise",
            Command::Report => "report",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AdviseArgs {
    /// Task text; mapped with the annotator unless --example-id names a
    /// recorded mapping.
    #[arg(long)]
    pub instruction: Option<String>,
    #[arg(long, default_value = "adhoc")]
    pub benchmark: String,
    #[arg(long)]
    pub example_id: Option<String>,
    /// Estimated complexity (number of granular steps) of the task.
    #[arg(long)]
    pub complexity: usize,
}

/// Inputs and parameters shared by all subcommands. Every field is
/// optional here; defaults are applied by [`Settings::resolve`].
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[arg(long, global = true, value_name = "FILE")]
    pub domain_taxonomy: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub skill_taxonomy: Option<PathBuf>,
    /// Task examples, one JSON object per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub examples: Option<PathBuf>,
    /// Mapping records, one JSON object per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub mappings: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub occupations: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub importances: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub digital_labels: Option<PathBuf>,
    /// `soc_code,task_text` rows to label DIGITAL/PHYSICAL with the annotator.
    #[arg(long, global = true, value_name = "FILE")]
    pub occupation_tasks: Option<PathBuf>,
    #[arg(long, global = true, value_name = "FILE")]
    pub workflows: Option<PathBuf>,
    /// `keyword:<rules.json>`, `replay:<outputs.jsonl>` or `remote`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub annotator: Option<String>,

    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Minimum per-batch coverage gain, in percentage points.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub permutations: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Autonomy success-rate threshold H.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub min_samples: Option<usize>,
    /// `raw` or `lcb`.
    #[arg(long, global = true)]
    pub confidence_mode: Option<ConfidenceMode>,
    /// Autonomy groupings, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub grouping: Option<Vec<Grouping>>,
    /// Pairs to put to the ordering judge; 0 skips the check.
    #[arg(long, global = true)]
    pub ordering_pairs: Option<usize>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Directory under which the timestamped run directory is created.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Options { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Options {
    /// Fields set here win over `fallback`.
    pub fn or(self, fallback: Options) -> Options {
        let (a, b) = (self, fallback);
        merge_fields!(a, b; domain_taxonomy, skill_taxonomy, examples, mappings, occupations, importances,
            digital_labels, occupation_tasks, workflows, annotator, batch_size, delta, permutations, seed,
            threshold, min_samples, confidence_mode, grouping, ordering_pairs, parallelism, out)
    }

    /// Reads a config file. Relative paths in it are taken relative to
    /// the file's directory.
    pub fn from_toml_file(path: &Path) -> CliResult<Options> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut opts: Options =
            toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut opts.domain_taxonomy,
            &mut opts.skill_taxonomy,
            &mut opts.examples,
            &mut opts.mappings,
            &mut opts.occupations,
            &mut opts.importances,
            &mut opts.digital_labels,
            &mut opts.occupation_tasks,
            &mut opts.workflows,
            &mut opts.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(spec) = &mut opts.annotator {
            for prefix in ["keyword:", "replay:"] {
                if let Some(rest) = spec.strip_prefix(prefix) {
                    if Path::new(rest).is_relative() {
                        *spec = format!("{prefix}{}", base.join(rest).display());
                    }
                }
            }
        }
        Ok(opts)
    }
}

/// Fully resolved configuration, echoed into every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub subcommand: String,
    pub domain_taxonomy: Option<PathBuf>,
    pub skill_taxonomy: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub mappings: Option<PathBuf>,
    pub occupations: Option<PathBuf>,
    pub importances: Option<PathBuf>,
    pub digital_labels: Option<PathBuf>,
    pub occupation_tasks: Option<PathBuf>,
    pub workflows: Option<PathBuf>,
    pub annotator: Option<String>,
    pub batch_size: usize,
    pub delta: f64,
    pub permutations: usize,
    pub seed: u64,
    pub threshold: f64,
    pub min_samples: usize,
    pub confidence_mode: ConfidenceMode,
    /// Explicitly requested groupings; `None` means all applicable.
    pub grouping: Option<Vec<Grouping>>,
    pub ordering_pairs: usize,
    pub parallelism: usize,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advise: Option<AdviseArgs>,
}

impl Settings {
    pub fn resolve(command: &Command, o: Options) -> CliResult<Settings> {
        let s = Settings {
            subcommand: command.name().to_string(),
            domain_taxonomy: o.domain_taxonomy,
            skill_taxonomy: o.skill_taxonomy,
            examples: o.examples,
            mappings: o.mappings,
            occupations: o.occupations,
            importances: o.importances,
            digital_labels: o.digital_labels,
            occupation_tasks: o.occupation_tasks,
            workflows: o.workflows,
            annotator: o.annotator,
            batch_size: o.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            delta: o.delta.unwrap_or(DEFAULT_DELTA),
            permutations: o.permutations.unwrap_or(DEFAULT_PERMUTATIONS),
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            threshold: o.threshold.unwrap_or(DEFAULT_THRESHOLD),
            min_samples: o.min_samples.unwrap_or(DEFAULT_MIN_SAMPLES),
            confidence_mode: o.confidence_mode.unwrap_or_default(),
            grouping: o.grouping,
            ordering_pairs: o.ordering_pairs.unwrap_or(0),
            parallelism: o.parallelism.unwrap_or(DEFAULT_PARALLELISM),
            out: o.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            advise: match command {
                Command::Advise(a) => Some(a.clone()),
                _ => None,
            },
        };
        if s.batch_size == 0 {
            return Err(CliError::config("--batch-size must be at least 1"));
        }
        if !(s.delta > 0.0 && s.delta.is_finite()) {
            return Err(CliError::config("--delta must be a positive number"));
        }
        if s.permutations == 0 {
            return Err(CliError::config("--permutations must be at least 1"));
        }
        if !(s.threshold > 0.0 && s.threshold <= 1.0) {
            return Err(CliError::config("--threshold must lie in (0, 1]"));
        }
        if s.min_samples == 0 {
            return Err(CliError::config("--min-samples must be at least 1"));
        }
        if s.parallelism == 0 {
            return Err(CliError::config("--parallelism must be at least 1"));
        }
        Ok(s)
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| CliError::config(format!("`{}` needs --{flag}", self.subcommand)))
    }
}
