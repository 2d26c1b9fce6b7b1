//! Employment, capital, importance-weighted skill values and digital shares.
//!
//! Effective skill values weight each occupation by the normalized
//! importance of the skill in that occupation. They are relative weights,
//! not head-counts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotator::{annotate_with_retry, AnnotationRequest, AnnotationTask, Annotator, RetriesExhausted, RetryPolicy};
use crate::coverage::{EffortDistribution, GroupLevel};
use crate::scalar::{ParseScalar, Scalar};
use crate::taxonomy::{NodeRef, Taxonomy, TaxonomyKind, ACTIVITY_ID_KEY, SOC_CODE_KEY};

/// Label attached to every effective (importance-weighted) value.
pub const RELATIVE_WEIGHT_NOTE: &str = "relative importance weights, not worker counts";

#[derive(Debug, Error)]
pub enum EconomicsError {
    #[error("cannot read {what}: {source}")]
    Io { what: String, source: std::io::Error },
    #[error("{what}, line {line}: {message}")]
    Parse { what: String, line: usize, message: String },
    #[error("duplicate SOC code `{0}`")]
    DuplicateSoc(String),
    #[error("duplicate importance record for ({soc_code}, {activity_id})")]
    DuplicateImportance { soc_code: String, activity_id: String },
    #[error("importance record ({soc_code}, {activity_id}) names an unknown activity")]
    UnknownActivity { soc_code: String, activity_id: String },
    #[error("importance {value} for ({soc_code}, {activity_id}) is outside [0, {scale_max}]")]
    ImportanceOutOfScale { soc_code: String, activity_id: String, value: String, scale_max: String },
    #[error("digital label for unknown occupation `{0}`")]
    UnknownOccupation(String),
    #[error("{0} must be non-negative for `{1}`")]
    Negative(&'static str, String),
    #[error("importance scale maximum must be positive")]
    ScaleMax,
    #[error("expected a {expected} taxonomy, got {found}")]
    WrongTaxonomy { expected: TaxonomyKind, found: TaxonomyKind },
    #[error("effort is grouped by {effort:?} but the economic table by {econ:?}")]
    LevelMismatch { effort: GroupLevel, econ: GroupLevel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationStats<S> {
    pub soc_code: String,
    pub title: String,
    pub employment: S,
    pub median_wage: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRecord<S> {
    pub soc_code: String,
    pub activity_id: String,
    pub importance: S,
}

/// Importance records together with the declared maximum of their scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceTable<S> {
    pub scale_max: S,
    pub records: Vec<ImportanceRecord<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DigitalClass {
    #[serde(rename = "DIGITAL")]
    Digital,
    #[serde(rename = "PHYSICAL")]
    Physical,
}

impl DigitalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DigitalClass::Digital => "DIGITAL",
            DigitalClass::Physical => "PHYSICAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalLabel {
    pub soc_code: String,
    /// Empty when the label was loaded from a labels file, which only
    /// stores the hash.
    pub task_text: String,
    pub task_hash: String,
    pub label: DigitalClass,
    pub justification: String,
}

/// Short stable identifier of a task text.
pub fn task_hash(text: &str) -> String {
    let digest = Sha256::digest(text.trim().as_bytes());
    hex::encode(&digest[..8])
}

fn parse_field<S: ParseScalar>(what: &str, line: usize, name: &str, text: &str) -> Result<S, EconomicsError> {
    S::parse_decimal(text).ok_or_else(|| EconomicsError::Parse {
        what: what.into(),
        line,
        message: format!("{name} `{text}` is not a number"),
    })
}

fn csv_error(what: &str, e: csv::Error) -> EconomicsError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    EconomicsError::Parse { what: what.into(), line, message: e.to_string() }
}

#[derive(Deserialize)]
struct OccupationRow {
    soc_code: String,
    title: String,
    employment: String,
    median_wage: String,
}

/// Reads `soc_code,title,employment,median_wage` rows.
pub fn read_occupations<S: ParseScalar>(reader: impl Read) -> Result<Vec<OccupationStats<S>>, EconomicsError> {
    let what = "occupations file";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<OccupationRow>().enumerate() {
        let row = row.map_err(|e| csv_error(what, e))?;
        let line = i + 2;
        out.push(OccupationStats {
            employment: parse_field(what, line, "employment", &row.employment)?,
            median_wage: parse_field(what, line, "median_wage", &row.median_wage)?,
            soc_code: row.soc_code,
            title: row.title,
        });
    }
    Ok(out)
}

pub fn load_occupations<S: ParseScalar>(path: impl AsRef<Path>) -> Result<Vec<OccupationStats<S>>, EconomicsError> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|source| EconomicsError::Io { what: path.as_ref().display().to_string(), source })?;
    read_occupations(f)
}

#[derive(Deserialize)]
struct ImportanceRow {
    soc_code: String,
    activity_id: String,
    importance: String,
}

/// Reads an importance file: a `# scale_max: <value>` comment line followed
/// by `soc_code,activity_id,importance` CSV.
pub fn read_importances<S: ParseScalar>(reader: impl BufRead) -> Result<ImportanceTable<S>, EconomicsError> {
    let what = "importance file";
    let mut scale_max = None;
    let mut body = String::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EconomicsError::Io { what: what.into(), source })?;
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some((k, v)) = comment.split_once(':') {
                if k.trim() == "scale_max" {
                    scale_max = Some(parse_field::<S>(what, i + 1, "scale_max", v)?);
                }
            }
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let scale_max = scale_max.ok_or_else(|| EconomicsError::Parse {
        what: what.into(),
        line: 1,
        message: "missing `# scale_max: <value>` header line".into(),
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let mut records = Vec::new();
    for row in rdr.deserialize::<ImportanceRow>() {
        let row = row.map_err(|e| csv_error(what, e))?;
        let line = records.len() + 2;
        records.push(ImportanceRecord {
            importance: parse_field(what, line, "importance", &row.importance)?,
            soc_code: row.soc_code,
            activity_id: row.activity_id,
        });
    }
    Ok(ImportanceTable { scale_max, records })
}

pub fn load_importances<S: ParseScalar>(path: impl AsRef<Path>) -> Result<ImportanceTable<S>, EconomicsError> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|source| EconomicsError::Io { what: path.as_ref().display().to_string(), source })?;
    read_importances(std::io::BufReader::new(f))
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    soc_code: String,
    task_hash: String,
    label: DigitalClass,
    justification: String,
}

/// Reads `soc_code,task_hash,label,justification` rows.
pub fn read_digital_labels(reader: impl Read) -> Result<Vec<DigitalLabel>, EconomicsError> {
    let what = "digital labels file";
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<LabelRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_error(what, e))?;
            Ok(DigitalLabel {
                soc_code: row.soc_code,
                task_text: String::new(),
                task_hash: row.task_hash,
                label: row.label,
                justification: row.justification,
            })
        })
        .collect()
}

pub fn load_digital_labels(path: impl AsRef<Path>) -> Result<Vec<DigitalLabel>, EconomicsError> {
    let f = std::fs::File::open(path.as_ref())
        .map_err(|source| EconomicsError::Io { what: path.as_ref().display().to_string(), source })?;
    read_digital_labels(f)
}

pub fn write_digital_labels(writer: impl std::io::Write, labels: &[DigitalLabel]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for l in labels {
        w.serialize(LabelRow {
            soc_code: l.soc_code.clone(),
            task_hash: l.task_hash.clone(),
            label: l.label,
            justification: l.justification.clone(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EconRow<S> {
    pub node_id: String,
    pub label: String,
    pub level: usize,
    pub employment: S,
    pub capital: S,
    /// Occupations contributing to this row.
    pub occupations: usize,
}

/// Per-node employment and capital at one grouping level.
#[derive(Debug, Clone, PartialEq)]
pub struct EconTable<S> {
    pub group_level: GroupLevel,
    /// Rows in taxonomy order.
    pub rows: Vec<EconRow<S>>,
    /// SOC codes present in the input but absent from the taxonomy.
    pub unmatched: Vec<String>,
    pub total_employment: S,
    pub total_capital: S,
    /// Set for importance-weighted tables; see [`RELATIVE_WEIGHT_NOTE`].
    pub relative_weights: bool,
}

impl<S: Scalar> EconTable<S> {
    pub fn row(&self, node_id: &str) -> Option<&EconRow<S>> {
        self.rows.iter().find(|r| r.node_id == node_id)
    }
}

fn check_occupations<S: Scalar>(occ: &[OccupationStats<S>]) -> Result<HashMap<&str, &OccupationStats<S>>, EconomicsError> {
    let mut by_soc = HashMap::with_capacity(occ.len());
    for o in occ {
        if o.employment < S::zero() {
            return Err(EconomicsError::Negative("employment", o.soc_code.clone()));
        }
        if o.median_wage < S::zero() {
            return Err(EconomicsError::Negative("median_wage", o.soc_code.clone()));
        }
        if by_soc.insert(o.soc_code.trim(), o).is_some() {
            return Err(EconomicsError::DuplicateSoc(o.soc_code.clone()));
        }
    }
    Ok(by_soc)
}

fn expect_kind(t: &Taxonomy, kind: TaxonomyKind) -> Result<(), EconomicsError> {
    if t.kind() != kind {
        return Err(EconomicsError::WrongTaxonomy { expected: kind, found: t.kind() });
    }
    Ok(())
}

/// SOC code → job family node for every annotated occupation node.
fn soc_families(t: &Taxonomy) -> HashMap<String, NodeRef<'_>> {
    let mut map = HashMap::new();
    for occ in t.nodes_at_level(2) {
        if let (Some(soc), Some(family)) = (occ.annotation(SOC_CODE_KEY), occ.parent()) {
            map.entry(soc.trim().to_string()).or_insert(family);
        }
    }
    map
}

/// Employment and capital (employment × median wage) summed per job family.
pub fn domain_employment_capital<S: Scalar>(
    occ: &[OccupationStats<S>],
    domain: &Taxonomy,
) -> Result<EconTable<S>, EconomicsError> {
    expect_kind(domain, TaxonomyKind::Domain)?;
    check_occupations(occ)?;
    let families = soc_families(domain);
    let mut acc: HashMap<&str, (S, S, usize)> = HashMap::new();
    let mut unmatched = Vec::new();
    for o in occ {
        match families.get(o.soc_code.trim()) {
            Some(f) => {
                let e = acc.entry(f.id()).or_insert((S::zero(), S::zero(), 0));
                e.0 = e.0 + o.employment;
                e.1 = e.1 + o.employment * o.median_wage;
                e.2 += 1;
            }
            None => unmatched.push(o.soc_code.clone()),
        }
    }
    let rows: Vec<EconRow<S>> = domain
        .nodes_at_level(1)
        .map(|f| {
            let (employment, capital, occupations) = acc.get(f.id()).copied().unwrap_or((S::zero(), S::zero(), 0));
            EconRow { node_id: f.id().into(), label: f.label().into(), level: 1, employment, capital, occupations }
        })
        .collect();
    Ok(EconTable {
        group_level: GroupLevel::DomainFamily,
        total_employment: crate::scalar::sum(rows.iter().map(|r| r.employment)),
        total_capital: crate::scalar::sum(rows.iter().map(|r| r.capital)),
        rows,
        unmatched,
        relative_weights: false,
    })
}

/// Importance-weighted employment and capital for every skill node.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillEconTable<S> {
    /// Every skill node below the root, taxonomy order; parents hold the
    /// sum of their children.
    pub nodes: Vec<EconRow<S>>,
    /// SOC codes referenced by importance records but missing from the
    /// occupation data.
    pub unmatched: Vec<String>,
    pub note: &'static str,
}

impl<S: Scalar> SkillEconTable<S> {
    /// Leaf rows as an [`EconTable`] grouped by skill leaf.
    pub fn leaf_table(&self) -> EconTable<S> {
        let rows: Vec<_> = self.nodes.iter().filter(|r| r.level == crate::taxonomy::PATH_DEPTH).cloned().collect();
        EconTable {
            group_level: GroupLevel::SkillLeaf,
            total_employment: crate::scalar::sum(rows.iter().map(|r| r.employment)),
            total_capital: crate::scalar::sum(rows.iter().map(|r| r.capital)),
            rows,
            unmatched: self.unmatched.clone(),
            relative_weights: true,
        }
    }

    pub fn node(&self, id: &str) -> Option<&EconRow<S>> {
        self.nodes.iter().find(|r| r.node_id == id)
    }
}

/// Skill leaf for an activity identifier: the node annotated with it, or
/// failing that the leaf whose id equals it.
fn activity_leaf<'a>(t: &'a Taxonomy, activity_id: &str) -> Option<NodeRef<'a>> {
    t.find_by_annotation(ACTIVITY_ID_KEY, activity_id)
        .or_else(|| t.node(activity_id))
        .filter(|n| n.is_leaf() && n.level() > 0)
}

pub fn effective_skill_employment_capital<S: Scalar>(
    occ: &[OccupationStats<S>],
    importances: &ImportanceTable<S>,
    skill: &Taxonomy,
) -> Result<SkillEconTable<S>, EconomicsError> {
    expect_kind(skill, TaxonomyKind::Skill)?;
    if !(importances.scale_max > S::zero()) {
        return Err(EconomicsError::ScaleMax);
    }
    let by_soc = check_occupations(occ)?;
    let mut seen = HashSet::new();
    let mut leaf_acc: HashMap<&str, (S, S, HashSet<&str>)> = HashMap::new();
    let mut unmatched = Vec::new();
    for rec in &importances.records {
        if !seen.insert((rec.soc_code.trim(), rec.activity_id.trim())) {
            return Err(EconomicsError::DuplicateImportance {
                soc_code: rec.soc_code.clone(),
                activity_id: rec.activity_id.clone(),
            });
        }
        if rec.importance < S::zero() || rec.importance > importances.scale_max {
            return Err(EconomicsError::ImportanceOutOfScale {
                soc_code: rec.soc_code.clone(),
                activity_id: rec.activity_id.clone(),
                value: rec.importance.to_string(),
                scale_max: importances.scale_max.to_string(),
            });
        }
        let leaf = activity_leaf(skill, rec.activity_id.trim()).ok_or_else(|| EconomicsError::UnknownActivity {
            soc_code: rec.soc_code.clone(),
            activity_id: rec.activity_id.clone(),
        })?;
        let Some(o) = by_soc.get(rec.soc_code.trim()) else {
            if !unmatched.contains(&rec.soc_code) {
                unmatched.push(rec.soc_code.clone());
            }
            continue;
        };
        let weight = rec.importance / importances.scale_max;
        let e = leaf_acc.entry(leaf.id()).or_insert((S::zero(), S::zero(), HashSet::new()));
        e.0 = e.0 + o.employment * weight;
        e.1 = e.1 + o.employment * o.median_wage * weight;
        e.2.insert(o.soc_code.as_str());
    }

    // Post-order accumulation: leaves first, then parents as sums.
    fn fill<'a, S: Scalar>(
        node: NodeRef<'a>,
        leaf_acc: &HashMap<&str, (S, S, HashSet<&str>)>,
        out: &mut BTreeMap<&'a str, (S, S, usize)>,
    ) -> (S, S, usize) {
        let v = if node.is_leaf() {
            leaf_acc.get(node.id()).map(|(e, c, o)| (*e, *c, o.len())).unwrap_or((S::zero(), S::zero(), 0))
        } else {
            node.children().fold((S::zero(), S::zero(), 0), |acc, c| {
                let (e, k, n) = fill(c, leaf_acc, out);
                (acc.0 + e, acc.1 + k, acc.2 + n)
            })
        };
        out.insert(node.id(), v);
        v
    }
    let mut values = BTreeMap::new();
    fill(skill.root_ref(), &leaf_acc, &mut values);
    let mut nodes = Vec::new();
    for level in 1..=crate::taxonomy::PATH_DEPTH {
        for n in skill.nodes_at_level(level) {
            let (employment, capital, occupations) = values[n.id()];
            nodes.push(EconRow { node_id: n.id().into(), label: n.label().into(), level, employment, capital, occupations });
        }
    }
    Ok(SkillEconTable { nodes, unmatched, note: RELATIVE_WEIGHT_NOTE })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationDigital<S> {
    pub soc_code: String,
    pub digital: usize,
    pub total: usize,
    pub ratio: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyDigital<S> {
    pub node_id: String,
    pub label: String,
    /// Employment-weighted mean of occupation ratios.
    pub employment_weighted: Option<S>,
    /// Capital-weighted mean of occupation ratios.
    pub capital_weighted: Option<S>,
    /// Plain mean of occupation ratios.
    pub unweighted: Option<S>,
    pub occupations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalShareTable<S> {
    pub occupations: Vec<OccupationDigital<S>>,
    pub families: Vec<FamilyDigital<S>>,
    /// Occupations in the data with no labeled tasks.
    pub excluded: Vec<String>,
    /// Labeled occupations not found in the domain taxonomy.
    pub unmatched: Vec<String>,
}

impl<S: Scalar> DigitalShareTable<S> {
    /// Employment-weighted share per family id.
    pub fn by_family(&self) -> BTreeMap<String, Option<S>> {
        self.families.iter().map(|f| (f.node_id.clone(), f.employment_weighted)).collect()
    }
}

pub fn digital_share<S: Scalar>(
    labels: &[DigitalLabel],
    occ: &[OccupationStats<S>],
    domain: &Taxonomy,
) -> Result<DigitalShareTable<S>, EconomicsError> {
    expect_kind(domain, TaxonomyKind::Domain)?;
    let by_soc = check_occupations(occ)?;
    let mut tallies: HashMap<&str, (usize, usize)> = HashMap::new();
    for l in labels {
        let soc = l.soc_code.trim();
        if !by_soc.contains_key(soc) {
            return Err(EconomicsError::UnknownOccupation(l.soc_code.clone()));
        }
        let t = tallies.entry(soc).or_default();
        t.1 += 1;
        if l.label == DigitalClass::Digital {
            t.0 += 1;
        }
    }
    let families = soc_families(domain);
    let mut occupations = Vec::new();
    let mut excluded = Vec::new();
    let mut unmatched = Vec::new();
    // family id → (Σ emp·r, Σ emp, Σ cap·r, Σ cap, Σ r, n)
    let mut fam: HashMap<&str, (S, S, S, S, S, usize)> = HashMap::new();
    for o in occ {
        let soc = o.soc_code.trim();
        let Some(&(digital, total)) = tallies.get(soc) else {
            excluded.push(o.soc_code.clone());
            continue;
        };
        let ratio = S::ratio(digital, total);
        occupations.push(OccupationDigital { soc_code: o.soc_code.clone(), digital, total, ratio });
        match families.get(soc) {
            Some(f) => {
                let cap = o.employment * o.median_wage;
                let e = fam.entry(f.id()).or_insert((S::zero(), S::zero(), S::zero(), S::zero(), S::zero(), 0));
                e.0 = e.0 + o.employment * ratio;
                e.1 = e.1 + o.employment;
                e.2 = e.2 + cap * ratio;
                e.3 = e.3 + cap;
                e.4 = e.4 + ratio;
                e.5 += 1;
            }
            None => unmatched.push(o.soc_code.clone()),
        }
    }
    let weighted = |num: S, den: S| if den > S::zero() { Some(num / den) } else { None };
    let families = domain
        .nodes_at_level(1)
        .map(|f| {
            let v = fam.get(f.id());
            FamilyDigital {
                node_id: f.id().into(),
                label: f.label().into(),
                employment_weighted: v.and_then(|v| weighted(v.0, v.1)),
                capital_weighted: v.and_then(|v| weighted(v.2, v.3)),
                unweighted: v.filter(|v| v.5 > 0).map(|v| v.4 / S::from_count(v.5)),
                occupations: v.map_or(0, |v| v.5),
            }
        })
        .collect();
    Ok(DigitalShareTable { occupations, families, excluded, unmatched })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationTask {
    pub soc_code: String,
    pub occupation: String,
    pub task_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnlabeledTask {
    pub task: OccupationTask,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelingOutcome {
    pub labels: Vec<DigitalLabel>,
    pub unlabeled: Vec<UnlabeledTask>,
}

/// Parses `DIGITAL` / `PHYSICAL` followed by an optional justification.
/// The label must be the first word, upper case.
pub fn parse_digital_response(raw: &str) -> Option<(DigitalClass, String)> {
    let text = raw.trim().trim_start_matches(['*', '`', '"']);
    let end = text.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(text.len());
    let label = match &text[..end] {
        "DIGITAL" => DigitalClass::Digital,
        "PHYSICAL" => DigitalClass::Physical,
        _ => return None,
    };
    let rest = text[end..].trim_start_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
    Some((label, rest.trim().to_string()))
}

/// Labels each task DIGITAL or PHYSICAL. A response outside the two-label
/// vocabulary is retried once, then recorded as unlabeled.
pub fn label_tasks_digital<A: Annotator + ?Sized>(
    tasks: &[OccupationTask],
    annotator: &A,
    policy: RetryPolicy,
) -> Result<LabelingOutcome, RetriesExhausted> {
    let mut out = LabelingOutcome::default();
    for task in tasks {
        let hash = task_hash(&task.task_text);
        let request = AnnotationRequest {
            key: format!("digital/{}/{hash}", task.soc_code),
            task: AnnotationTask::DigitalLabel {
                occupation: task.occupation.clone(),
                task_text: task.task_text.clone(),
            },
        };
        let mut parsed = None;
        let mut last_raw = String::new();
        for _ in 0..2 {
            last_raw = annotate_with_retry(annotator, &request, policy)?;
            parsed = parse_digital_response(&last_raw);
            if parsed.is_some() {
                break;
            }
            log::warn!("unparseable digital label for {}: {last_raw:?}", request.key);
        }
        match parsed {
            Some((label, justification)) => out.labels.push(DigitalLabel {
                soc_code: task.soc_code.clone(),
                task_text: task.task_text.clone(),
                task_hash: hash,
                label,
                justification,
            }),
            None => out.unlabeled.push(UnlabeledTask { task: task.clone(), raw: last_raw }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRow<S> {
    pub node_id: String,
    pub label: String,
    pub effort_count: usize,
    pub effort_share: S,
    pub employment_share: S,
    pub capital_share: S,
    pub digital_share: Option<S>,
    /// effort share / employment share; `None` when employment share is 0.
    pub effort_to_employment: Option<S>,
}

/// Per-node comparison of benchmark effort with labor-market weight.
pub fn alignment_report<S: Scalar>(
    effort: &EffortDistribution,
    econ: &EconTable<S>,
    digital: Option<&BTreeMap<String, Option<S>>>,
) -> Result<Vec<AlignmentRow<S>>, EconomicsError> {
    if effort.group_level != econ.group_level {
        return Err(EconomicsError::LevelMismatch { effort: effort.group_level, econ: econ.group_level });
    }
    let effort_total = effort.total_incidences();
    let share = |num: S, den: S| if den > S::zero() { num / den } else { S::zero() };
    Ok(econ
        .rows
        .iter()
        .map(|r| {
            let count = effort.counts.get(&r.node_id).copied().unwrap_or(0);
            let effort_share = if effort_total == 0 { S::zero() } else { S::ratio(count, effort_total) };
            let employment_share = share(r.employment, econ.total_employment);
            AlignmentRow {
                node_id: r.node_id.clone(),
                label: r.label.clone(),
                effort_count: count,
                effort_share,
                employment_share,
                capital_share: share(r.capital, econ.total_capital),
                digital_share: digital.and_then(|d| d.get(&r.node_id).copied().flatten()),
                effort_to_employment: (employment_share > S::zero()).then(|| effort_share / employment_share),
            }
        })
        .collect())
}
