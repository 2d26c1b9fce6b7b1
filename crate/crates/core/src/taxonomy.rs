//! Domain and skill taxonomies and the root-to-leaf path model.
//!
//! A taxonomy is loaded from a JSON document of the form
//! `{"kind": "domain"|"skill", "root": {"id", "label", "annotations"?, "children": [...]}}`
//! and is immutable afterwards. Every leaf sits exactly [`PATH_DEPTH`] levels
//! below the root, so every path has three elements.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of levels below the root. Domain: family, occupation, task.
/// Skill: three work-activity layers.
pub const PATH_DEPTH: usize = 3;

/// Annotation key carrying the SOC code of a domain occupation node.
pub const SOC_CODE_KEY: &str = "soc_code";
/// Annotation key carrying the activity identifier of a skill leaf.
pub const ACTIVITY_ID_KEY: &str = "activity_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyKind {
    Domain,
    Skill,
}

impl TaxonomyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaxonomyKind::Domain => "domain",
            TaxonomyKind::Skill => "skill",
        }
    }
}

impl fmt::Display for TaxonomyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaxonomyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "domain" => Ok(TaxonomyKind::Domain),
            "skill" => Ok(TaxonomyKind::Skill),
            other => Err(format!("unknown taxonomy kind `{other}`")),
        }
    }
}

/// A node of a taxonomy document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub id: String,
    pub label: String,
    /// Depth below the root. Optional in documents; filled in and checked
    /// on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
    #[serde(default)]
    pub children: Vec<TaxonomyNode>,
}

impl TaxonomyNode {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        TaxonomyNode {
            id: id.into(),
            label: label.into(),
            level: None,
            annotations: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<TaxonomyNode>) -> Self {
        self.children = children;
        self
    }

    pub fn with_annotation(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.annotations.insert(key.into(), value.into());
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyDocument {
    pub kind: TaxonomyKind,
    pub root: TaxonomyNode,
}

/// A root-to-leaf path, stored as node ids from the root's child down to
/// the leaf. The root itself is implied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaxonomyPath {
    pub taxonomy_kind: TaxonomyKind,
    pub node_ids: Vec<String>,
}

impl TaxonomyPath {
    pub fn leaf_id(&self) -> &str {
        self.node_ids.last().map(String::as_str).unwrap_or("")
    }

    /// Node id at `level` (1-based, root excluded).
    pub fn id_at_level(&self, level: usize) -> Option<&str> {
        level.checked_sub(1).and_then(|i| self.node_ids.get(i)).map(String::as_str)
    }
}

impl fmt::Display for TaxonomyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.taxonomy_kind, self.node_ids.join("/"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralViolation {
    pub node_id: String,
    pub reason: String,
}

impl fmt::Display for StructuralViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node `{}`: {}", self.node_id, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy document: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed taxonomy document: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid taxonomy structure: {}", join_violations(.0))]
    Structure(Vec<StructuralViolation>),
}

fn join_violations(v: &[StructuralViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("no taxonomy path matches {labels:?} (first mismatch at position {position})")]
    NoMatch { labels: Vec<String>, position: usize },
    #[error("labels {labels:?} stop at non-leaf node `{node_id}`")]
    PartialMatch { labels: Vec<String>, node_id: String },
}

/// Lower-cases, trims and collapses internal whitespace.
pub fn canonical_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone)]
struct NodeRecord {
    id: String,
    label: String,
    level: usize,
    parent: Option<usize>,
    children: Vec<usize>,
    annotations: BTreeMap<String, String>,
}

/// Read-only view of a node inside a loaded taxonomy.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    taxonomy: &'a Taxonomy,
    index: usize,
}

impl<'a> NodeRef<'a> {
    fn rec(&self) -> &'a NodeRecord {
        &self.taxonomy.nodes[self.index]
    }

    pub fn id(&self) -> &'a str {
        &self.rec().id
    }

    pub fn label(&self) -> &'a str {
        &self.rec().label
    }

    pub fn level(&self) -> usize {
        self.rec().level
    }

    pub fn annotation(&self, key: &str) -> Option<&'a str> {
        self.rec().annotations.get(key).map(String::as_str)
    }

    pub fn is_leaf(&self) -> bool {
        self.rec().children.is_empty()
    }

    pub fn parent(&self) -> Option<NodeRef<'a>> {
        self.rec().parent.map(|index| NodeRef { taxonomy: self.taxonomy, index })
    }

    pub fn children(&self) -> impl Iterator<Item = NodeRef<'a>> + 'a {
        let taxonomy = self.taxonomy;
        self.rec().children.iter().map(move |&index| NodeRef { taxonomy, index })
    }
}

/// A validated, immutable taxonomy.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    kind: TaxonomyKind,
    root: TaxonomyNode,
    nodes: Vec<NodeRecord>,
    by_id: HashMap<String, usize>,
    paths: Vec<TaxonomyPath>,
    path_lookup: HashMap<TaxonomyPath, usize>,
}

impl Taxonomy {
    pub fn from_json_str(text: &str) -> Result<Self, TaxonomyError> {
        let doc: TaxonomyDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: TaxonomyDocument) -> Result<Self, TaxonomyError> {
        let TaxonomyDocument { kind, mut root } = doc;
        let mut violations = Vec::new();
        let mut nodes = Vec::new();
        let mut by_id = HashMap::new();

        if root.children.is_empty() {
            violations.push(StructuralViolation {
                node_id: root.id.clone(),
                reason: "taxonomy must have at least one leaf below the root".into(),
            });
        }

        // Iterative pre-order walk so node indices follow document order.
        let mut stack: Vec<(&mut TaxonomyNode, usize, Option<usize>)> = vec![(&mut root, 0, None)];
        while let Some((node, level, parent)) = stack.pop() {
            if let Some(declared) = node.level {
                if declared != level {
                    violations.push(StructuralViolation {
                        node_id: node.id.clone(),
                        reason: format!("declared level {declared} but sits at depth {level}"),
                    });
                }
            }
            node.level = Some(level);
            check_node(kind, node, level, &mut violations);

            let index = nodes.len();
            if by_id.insert(node.id.clone(), index).is_some() {
                violations.push(StructuralViolation {
                    node_id: node.id.clone(),
                    reason: "duplicate node id".into(),
                });
            }
            nodes.push(NodeRecord {
                id: node.id.clone(),
                label: node.label.clone(),
                level,
                parent,
                children: Vec::new(),
                annotations: node.annotations.clone(),
            });
            if let Some(p) = parent {
                nodes[p].children.push(index);
            }

            let mut seen = HashSet::new();
            for child in &node.children {
                if !seen.insert(canonical_label(&child.label)) {
                    violations.push(StructuralViolation {
                        node_id: child.id.clone(),
                        reason: format!("sibling label `{}` is not unique under `{}`", child.label, node.id),
                    });
                }
            }
            for child in node.children.iter_mut().rev() {
                stack.push((child, level + 1, Some(index)));
            }
        }

        if !violations.is_empty() {
            return Err(TaxonomyError::Structure(violations));
        }

        let mut taxonomy = Taxonomy {
            kind,
            root,
            nodes,
            by_id,
            paths: Vec::new(),
            path_lookup: HashMap::new(),
        };
        taxonomy.index_paths();
        Ok(taxonomy)
    }

    fn index_paths(&mut self) {
        let mut paths = Vec::new();
        for (index, rec) in self.nodes.iter().enumerate() {
            if rec.children.is_empty() && rec.parent.is_some() {
                let mut ids = Vec::with_capacity(PATH_DEPTH);
                let mut cursor = Some(index);
                while let Some(i) = cursor {
                    if self.nodes[i].parent.is_none() {
                        break;
                    }
                    ids.push(self.nodes[i].id.clone());
                    cursor = self.nodes[i].parent;
                }
                ids.reverse();
                paths.push(TaxonomyPath { taxonomy_kind: self.kind, node_ids: ids });
            }
        }
        self.path_lookup = paths.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        self.paths = paths;
    }

    pub fn kind(&self) -> TaxonomyKind {
        self.kind
    }

    /// The source tree, with levels filled in.
    pub fn root(&self) -> &TaxonomyNode {
        &self.root
    }

    pub fn root_ref(&self) -> NodeRef<'_> {
        NodeRef { taxonomy: self, index: 0 }
    }

    /// Every root-to-leaf path exactly once, in document order.
    pub fn all_paths(&self) -> &[TaxonomyPath] {
        &self.paths
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_empty() && n.parent.is_some()).count()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Position of `path` in [`Taxonomy::all_paths`].
    pub fn path_index(&self, path: &TaxonomyPath) -> Option<usize> {
        self.path_lookup.get(path).copied()
    }

    pub fn contains_path(&self, path: &TaxonomyPath) -> bool {
        self.path_lookup.contains_key(path)
    }

    pub fn node(&self, id: &str) -> Option<NodeRef<'_>> {
        self.by_id.get(id).map(|&index| NodeRef { taxonomy: self, index })
    }

    pub fn nodes_at_level(&self, level: usize) -> impl Iterator<Item = NodeRef<'_>> {
        (0..self.nodes.len())
            .filter(move |&i| self.nodes[i].level == level)
            .map(move |index| NodeRef { taxonomy: self, index })
    }

    /// First node carrying annotation `key = value`.
    pub fn find_by_annotation(&self, key: &str, value: &str) -> Option<NodeRef<'_>> {
        self.nodes
            .iter()
            .position(|n| n.annotations.get(key).map(String::as_str) == Some(value))
            .map(|index| NodeRef { taxonomy: self, index })
    }

    /// Labels of a path, root excluded.
    pub fn labels(&self, path: &TaxonomyPath) -> Option<Vec<String>> {
        path.node_ids
            .iter()
            .map(|id| self.node(id).map(|n| n.label().to_string()))
            .collect()
    }

    /// Resolves a label sequence (root excluded) to the unique matching
    /// path. Labels are compared after [`canonical_label`].
    pub fn resolve_path<L: AsRef<str>>(&self, labels: &[L]) -> Result<TaxonomyPath, ResolveError> {
        let owned = || labels.iter().map(|l| l.as_ref().to_string()).collect::<Vec<_>>();
        let mut cursor = 0usize;
        let mut ids = Vec::with_capacity(labels.len());
        for (position, label) in labels.iter().enumerate() {
            let wanted = canonical_label(label.as_ref());
            let next = self.nodes[cursor]
                .children
                .iter()
                .copied()
                .find(|&c| canonical_label(&self.nodes[c].label) == wanted);
            match next {
                Some(c) => {
                    ids.push(self.nodes[c].id.clone());
                    cursor = c;
                }
                None => return Err(ResolveError::NoMatch { labels: owned(), position }),
            }
        }
        if cursor == 0 {
            return Err(ResolveError::NoMatch { labels: owned(), position: 0 });
        }
        if !self.nodes[cursor].children.is_empty() {
            return Err(ResolveError::PartialMatch {
                labels: owned(),
                node_id: self.nodes[cursor].id.clone(),
            });
        }
        Ok(TaxonomyPath { taxonomy_kind: self.kind, node_ids: ids })
    }

    /// Indentation-encoded rendering for annotator prompts. Internal nodes
    /// are written `+ label`, leaves `- label`, two spaces per level.
    pub fn flatten_for_prompt(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {} taxonomy: {}\n", self.kind, self.nodes[0].label));
        for rec in self.nodes.iter().skip(1) {
            let indent = "  ".repeat(rec.level - 1);
            let marker = if rec.children.is_empty() { '-' } else { '+' };
            out.push_str(&format!("{indent}{marker} {}\n", rec.label));
        }
        out
    }
}

fn check_node(kind: TaxonomyKind, node: &TaxonomyNode, level: usize, out: &mut Vec<StructuralViolation>) {
    if node.id.trim().is_empty() {
        out.push(StructuralViolation { node_id: node.id.clone(), reason: "empty node id".into() });
    }
    if node.label.trim().is_empty() {
        out.push(StructuralViolation { node_id: node.id.clone(), reason: "empty label".into() });
    }
    if level > PATH_DEPTH {
        out.push(StructuralViolation {
            node_id: node.id.clone(),
            reason: format!("node at depth {level} exceeds the {PATH_DEPTH} levels below the root"),
        });
    }
    if node.children.is_empty() && level > 0 && level < PATH_DEPTH {
        out.push(StructuralViolation {
            node_id: node.id.clone(),
            reason: format!("leaf at depth {level}; every leaf must sit at depth {PATH_DEPTH}"),
        });
    }
    if node.annotations.contains_key(SOC_CODE_KEY) && (kind != TaxonomyKind::Domain || level != 2) {
        out.push(StructuralViolation {
            node_id: node.id.clone(),
            reason: "SOC code annotations are only allowed on domain occupation nodes (depth 2)".into(),
        });
    }
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
    let text = std::fs::read_to_string(path)?;
    Taxonomy::from_json_str(&text)
}
