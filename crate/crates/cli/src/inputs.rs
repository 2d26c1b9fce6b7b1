use std::path::Path;

use atlas_core::annotator::{Annotator, KeywordAnnotator, RemoteAnnotator, ReplayAnnotator};
use atlas_core::autonomy::WorkflowDoc;
use atlas_core::mapping::{read_jsonl, MappingRecord, MappingResult, TaskExample};
use atlas_core::taxonomy::load_taxonomy;
use atlas_core::{Taxonomy, TaxonomyKind};
use serde::Deserialize;

use crate::args::Settings;
use crate::error::{CliError, CliResult};

pub fn taxonomy(path: &Path, kind: TaxonomyKind) -> CliResult<Taxonomy> {
    let t = load_taxonomy(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if t.kind() != kind {
        return Err(CliError::input(format!("{}: expected a {kind} taxonomy, found {}", path.display(), t.kind())));
    }
    Ok(t)
}

pub fn domain(s: &Settings) -> CliResult<Taxonomy> {
    taxonomy(s.require(&s.domain_taxonomy, "domain-taxonomy")?, TaxonomyKind::Domain)
}

pub fn skill(s: &Settings) -> CliResult<Taxonomy> {
    taxonomy(s.require(&s.skill_taxonomy, "skill-taxonomy")?, TaxonomyKind::Skill)
}

pub fn jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    read_jsonl(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn examples(s: &Settings) -> CliResult<Vec<TaskExample>> {
    jsonl(s.require(&s.examples, "examples")?)
}

/// Mapping records resolved against the taxonomy of their kind.
pub fn mappings_from(path: &Path, domain: &Taxonomy, skill: &Taxonomy) -> CliResult<Vec<MappingResult>> {
    let records: Vec<MappingRecord> = jsonl(path)?;
    records
        .into_iter()
        .map(|r| {
            let t = match r.taxonomy_kind {
                TaxonomyKind::Domain => domain,
                TaxonomyKind::Skill => skill,
            };
            r.into_result(t).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn mappings(s: &Settings, domain: &Taxonomy, skill: &Taxonomy) -> CliResult<Vec<MappingResult>> {
    mappings_from(s.require(&s.mappings, "mappings")?, domain, skill)
}

pub fn workflows(s: &Settings) -> CliResult<Vec<WorkflowDoc>> {
    jsonl(s.require(&s.workflows, "workflows")?)
}

/// Builds the annotator named by `--annotator`.
pub fn annotator(s: &Settings) -> CliResult<Box<dyn Annotator>> {
    let spec = s
        .annotator
        .as_deref()
        .ok_or_else(|| CliError::config(format!("`{}` needs --annotator", s.subcommand)))?;
    if let Some(path) = spec.strip_prefix("keyword:") {
        let a = KeywordAnnotator::from_json_file(path).map_err(|e| CliError::input(format!("{path}: {e}")))?;
        return Ok(Box::new(a));
    }
    if let Some(path) = spec.strip_prefix("replay:") {
        let a = ReplayAnnotator::from_jsonl(format!("replay:{path}"), path)
            .map_err(|e| CliError::input(format!("{path}: {e}")))?;
        return Ok(Box::new(a));
    }
    if spec == "remote" {
        let a = RemoteAnnotator::from_env().map_err(|e| CliError::config(format!("remote annotator: {e}")))?;
        return Ok(Box::new(a));
    }
    Err(CliError::config(format!(
        "unknown annotator `{spec}` (expected keyword:<rules.json>, replay:<outputs.jsonl> or remote)"
    )))
}

