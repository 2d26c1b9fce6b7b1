use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::Settings;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Number formatting used by every table: integers print bare, other
/// values with six decimals.
pub fn num(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.6}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputEntry {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub started_at: String,
    pub finished_at: String,
    pub config: &'a Settings,
    pub inputs: BTreeMap<String, InputEntry>,
    pub outputs: Vec<OutputEntry>,
    pub notes: Vec<String>,
}

/// A run directory and the files written into it.
pub struct Bundle {
    pub dir: PathBuf,
    started_at: String,
    outputs: Vec<OutputEntry>,
    pub notes: Vec<String>,
}

impl Bundle {
    /// Creates `<root>/<subcommand>-<UTC timestamp>`, never reusing an
    /// existing directory.
    pub fn create(root: &Path, subcommand: &str) -> CliResult<Bundle> {
        let now = Utc::now();
        let stamp = now.format("%Y%m%dT%H%M%S%.3fZ").to_string();
        fs::create_dir_all(root)
            .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", root.display())))?;
        let mut dir = root.join(format!("{subcommand}-{stamp}"));
        let mut n = 1;
        loop {
            match fs::create_dir(&dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    n += 1;
                    dir = root.join(format!("{subcommand}-{stamp}-{n}"));
                }
                Err(e) => return Err(CliError::config(format!("cannot create {}: {e}", dir.display()))),
            }
        }
        Ok(Bundle {
            dir,
            started_at: now.to_rfc3339_opts(SecondsFormat::Millis, true),
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        if self.outputs.iter().any(|o| o.file == name) {
            return Err(CliError::internal(format!("output `{name}` written twice")));
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(OutputEntry { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::internal(format!("{name}: {e}"));
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        self.write(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::internal(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        let text = text.into();
        log::info!("{text}");
        self.notes.push(text);
    }

    pub fn outputs(&self) -> &[OutputEntry] {
        &self.outputs
    }

    /// Writes the manifest and returns the run directory.
    pub fn finish(self, settings: &Settings) -> CliResult<PathBuf> {
        let inputs = input_digests(settings)?;
        let manifest = Manifest {
            tool: "atlas",
            version: env!("CARGO_PKG_VERSION"),
            started_at: self.started_at,
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            config: settings,
            inputs,
            outputs: self.outputs,
            notes: self.notes,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::internal(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, bytes).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.dir)
    }
}

fn input_digests(s: &Settings) -> CliResult<BTreeMap<String, InputEntry>> {
    let mut out = BTreeMap::new();
    let mut files: Vec<(&str, Option<PathBuf>)> = vec![
        ("domain_taxonomy", s.domain_taxonomy.clone()),
        ("skill_taxonomy", s.skill_taxonomy.clone()),
        ("examples", s.examples.clone()),
        ("mappings", s.mappings.clone()),
        ("occupations", s.occupations.clone()),
        ("importances", s.importances.clone()),
        ("digital_labels", s.digital_labels.clone()),
        ("occupation_tasks", s.occupation_tasks.clone()),
        ("workflows", s.workflows.clone()),
    ];
    if let Some(spec) = &s.annotator {
        let file = spec.strip_prefix("keyword:").or_else(|| spec.strip_prefix("replay:"));
        files.push(("annotator", file.map(PathBuf::from)));
    }
    for (name, path) in files {
        if let Some(path) = path {
            if path.is_file() {
                let sha256 = file_digest(&path)?;
                out.insert(name.to_string(), InputEntry { path, sha256 });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    pub label: String,
    pub unit: String,
}

impl Axis {
    pub fn new(label: &str, unit: &str) -> Self {
        Axis { label: label.into(), unit: unit.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Point {
    pub id: String,
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<Point>,
}

/// Scatter or bar data with axis metadata.
#[derive(Debug, Clone, Serialize)]
pub struct PlotData {
    pub name: String,
    pub kind: &'static str,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub series: Vec<Series>,
}

/// Row × column grid; `None` marks an empty cell.
#[derive(Debug, Clone, Serialize)]
pub struct HeatmapData {
    pub name: String,
    pub kind: &'static str,
    pub row_axis: Axis,
    pub column_axis: Axis,
    pub value_axis: Axis,
    pub rows: Vec<String>,
    pub columns: Vec<usize>,
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}
