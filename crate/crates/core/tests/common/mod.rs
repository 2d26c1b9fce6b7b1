#![allow(dead_code)]

use std::path::PathBuf;

use atlas_core::mapping::{ExampleKey, MappingResult, MappingStatus};
use atlas_core::taxonomy::{TaxonomyDocument, TaxonomyNode};
use atlas_core::{Taxonomy, TaxonomyKind, TaxonomyPath};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Regular three-level taxonomy with `a × b × c` leaves.
pub fn grid(kind: TaxonomyKind, a: usize, b: usize, c: usize) -> Taxonomy {
    let families = (0..a)
        .map(|i| {
            TaxonomyNode::new(format!("f{i}"), format!("family {i}")).with_children(
                (0..b)
                    .map(|j| {
                        TaxonomyNode::new(format!("f{i}g{j}"), format!("group {j}")).with_children(
                            (0..c).map(|k| TaxonomyNode::new(format!("f{i}g{j}l{k}"), format!("leaf {k}"))).collect(),
                        )
                    })
                    .collect(),
            )
        })
        .collect();
    let root = TaxonomyNode::new("root", "grid").with_children(families);
    Taxonomy::from_document(TaxonomyDocument { kind, root }).expect("grid taxonomy is valid")
}

pub fn key(benchmark: &str, id: usize) -> ExampleKey {
    ExampleKey { benchmark: benchmark.into(), example_id: id.to_string() }
}

/// A mapped result over the given path indices; empty when there are none.
pub fn result(t: &Taxonomy, example: ExampleKey, indices: &[usize]) -> MappingResult {
    let paths: Vec<TaxonomyPath> = indices.iter().map(|&i| t.all_paths()[i].clone()).collect();
    let n = paths.len();
    MappingResult::from_candidates(example, t.kind(), n, paths, String::new(), "test".into())
}

pub fn is_mapped(r: &MappingResult) -> bool {
    r.status == MappingStatus::Mapped
}
