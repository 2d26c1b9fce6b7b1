use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use atlas_core::autonomy::WorkflowDoc;
use atlas_core::economics::{load_digital_labels, load_importances, load_occupations};
use atlas_core::mapping::{MappingRecord, TaskExample};
use atlas_core::taxonomy::{ACTIVITY_ID_KEY, SOC_CODE_KEY};
use atlas_core::{Taxonomy, TaxonomyKind};
use serde::Serialize;

use crate::args::Settings;
use crate::inputs;

/// Problems found across the supplied inputs. Violations block any
/// computation; warnings are reported only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn load_tax(path: &Option<std::path::PathBuf>, kind: TaxonomyKind, report: &mut ValidationReport) -> Option<Taxonomy> {
    let path = path.as_deref()?;
    match inputs::taxonomy(path, kind) {
        Ok(t) => Some(t),
        Err(e) => {
            report.violations.push(e.message);
            None
        }
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// Parses every referenced file and runs the cross-file checks.
pub fn validate_inputs(s: &Settings) -> ValidationReport {
    let mut r = ValidationReport::default();
    let domain = load_tax(&s.domain_taxonomy, TaxonomyKind::Domain, &mut r);
    let skill = load_tax(&s.skill_taxonomy, TaxonomyKind::Skill, &mut r);

    let mut example_keys = None;
    if let Some(path) = s.examples.as_deref() {
        match inputs::jsonl::<TaskExample>(path) {
            Ok(examples) => {
                let mut seen = HashSet::new();
                for e in &examples {
                    if e.instruction.trim().is_empty() {
                        r.warnings.push(format!("{}: example {} has an empty instruction", show(path), e.key()));
                    }
                    if !seen.insert(e.key()) {
                        r.warnings.push(format!("{}: example {} appears more than once", show(path), e.key()));
                    }
                }
                example_keys = Some(seen);
            }
            Err(e) => r.violations.push(e.message),
        }
    }

    let mut mapped_keys = None;
    if let Some(path) = s.mappings.as_deref() {
        match inputs::jsonl::<MappingRecord>(path) {
            Ok(records) => {
                let keys = mapped_keys.insert(HashSet::new());
                for (i, rec) in records.into_iter().enumerate() {
                    let key = format!("{}/{}", rec.benchmark, rec.example_id);
                    keys.insert((rec.benchmark.clone(), rec.example_id.clone()));
                    if let Some(known) = &example_keys {
                        let k = atlas_core::ExampleKey { benchmark: rec.benchmark.clone(), example_id: rec.example_id.clone() };
                        if !known.contains(&k) {
                            r.violations.push(format!("{} line {}: mapping for unknown example {key}", show(path), i + 1));
                        }
                    }
                    let t = match rec.taxonomy_kind {
                        TaxonomyKind::Domain => domain.as_ref(),
                        TaxonomyKind::Skill => skill.as_ref(),
                    };
                    let Some(t) = t else { continue };
                    for labels in &rec.paths {
                        if t.resolve_path(labels).is_err() {
                            r.violations.push(format!(
                                "{} line {}: example {key} maps to path [{}], which is not in the {} taxonomy",
                                show(path),
                                i + 1,
                                labels.join(" > "),
                                rec.taxonomy_kind
                            ));
                        }
                    }
                    if let Err(e) = rec.into_result(t) {
                        if !matches!(e, atlas_core::mapping::RecordError::UnresolvedPath { .. }) {
                            r.violations.push(format!("{} line {}: {e}", show(path), i + 1));
                        }
                    }
                }
            }
            Err(e) => r.violations.push(e.message),
        }
    }

    let mut soc_codes = None;
    if let Some(path) = s.occupations.as_deref() {
        match load_occupations::<f64>(path) {
            Ok(occ) => {
                let mut seen = BTreeSet::new();
                let taxonomy_socs: BTreeSet<String> = domain
                    .iter()
                    .flat_map(|d| d.nodes_at_level(2).filter_map(|n| n.annotation(SOC_CODE_KEY)).map(str::to_string))
                    .collect();
                for (i, o) in occ.iter().enumerate() {
                    let row = i + 2;
                    if !seen.insert(o.soc_code.clone()) {
                        r.violations.push(format!("{} row {row}: duplicate SOC code {}", show(path), o.soc_code));
                    }
                    if o.employment < 0.0 || o.median_wage < 0.0 {
                        r.violations.push(format!("{} row {row}: negative employment or wage for {}", show(path), o.soc_code));
                    }
                    if domain.is_some() && !taxonomy_socs.contains(&o.soc_code) {
                        r.warnings.push(format!("{} row {row}: SOC code {} is not in the domain taxonomy", show(path), o.soc_code));
                    }
                }
                if domain.is_some() && taxonomy_socs.is_empty() {
                    r.warnings.push("domain taxonomy carries no soc_code annotations".into());
                }
                soc_codes = Some(seen);
            }
            Err(e) => r.violations.push(e.to_string()),
        }
    }

    if let Some(path) = s.importances.as_deref() {
        match load_importances::<f64>(path) {
            Ok(table) => {
                if table.scale_max <= 0.0 {
                    r.violations.push(format!("{}: scale_max must be positive", show(path)));
                }
                let mut seen = HashSet::new();
                for (i, rec) in table.records.iter().enumerate() {
                    // comment line and header precede the first record
                    let row = i + 3;
                    let id = format!("{} row {row} ({}, {})", show(path), rec.soc_code, rec.activity_id);
                    if let Some(t) = &skill {
                        let known = t
                            .find_by_annotation(ACTIVITY_ID_KEY, &rec.activity_id)
                            .or_else(|| t.node(&rec.activity_id))
                            .is_some_and(|n| n.is_leaf() && n.level() > 0);
                        if !known {
                            r.violations.push(format!("{id}: unknown activity_id {}", rec.activity_id));
                        }
                    }
                    if rec.importance < 0.0 || rec.importance > table.scale_max {
                        r.violations.push(format!("{id}: importance {} outside [0, {}]", rec.importance, table.scale_max));
                    }
                    if !seen.insert((rec.soc_code.clone(), rec.activity_id.clone())) {
                        r.violations.push(format!("{id}: duplicate record"));
                    }
                    if let Some(socs) = &soc_codes {
                        if !socs.contains(&rec.soc_code) {
                            r.warnings.push(format!("{id}: SOC code {} has no occupation row", rec.soc_code));
                        }
                    }
                }
            }
            Err(e) => r.violations.push(e.to_string()),
        }
    }

    if let Some(path) = s.digital_labels.as_deref() {
        match load_digital_labels(path) {
            Ok(labels) => {
                if let Some(socs) = &soc_codes {
                    for (i, l) in labels.iter().enumerate() {
                        if !socs.contains(&l.soc_code) {
                            r.violations.push(format!("{} row {}: label for unknown SOC code {}", show(path), i + 2, l.soc_code));
                        }
                    }
                }
            }
            Err(e) => r.violations.push(e.to_string()),
        }
    }

    if let Some(path) = s.occupation_tasks.as_deref() {
        if let Err(e) = crate::commands::read_occupation_tasks(path) {
            r.violations.push(e.message);
        }
    }

    if let Some(path) = s.workflows.as_deref() {
        match inputs::jsonl::<WorkflowDoc>(path) {
            Ok(docs) => {
                let mut ids = HashSet::new();
                for (i, d) in docs.iter().enumerate() {
                    if let Err(e) = d.complexity() {
                        r.violations.push(format!("{} line {}: {e}", show(path), i + 1));
                    }
                    if !ids.insert(d.trajectory_id.clone()) {
                        r.violations.push(format!("{} line {}: duplicate trajectory id {}", show(path), i + 1, d.trajectory_id));
                    }
                    if let Some(ex) = &d.example_id {
                        if mapped_keys.as_ref().is_some_and(|k| !k.contains(&(d.benchmark.clone(), ex.clone()))) {
                            r.warnings.push(format!(
                                "{} line {}: example {}/{ex} has no mapping; grouped as unattributed",
                                show(path),
                                i + 1,
                                d.benchmark
                            ));
                        }
                    }
                }
            }
            Err(e) => r.violations.push(e.message),
        }
    }
    r
}
