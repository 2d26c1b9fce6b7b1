#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_str(name: &str) -> String {
    fixture(name).display().to_string()
}

/// Flags pointing at every fixture input.
pub fn fixture_flags() -> Vec<String> {
    fixture_flags_with(&[])
}

/// Like [`fixture_flags`], with some inputs swapped for other files.
pub fn fixture_flags_with(replace: &[(&str, &Path)]) -> Vec<String> {
    let mut v = Vec::new();
    for (flag, file) in [
        ("--domain-taxonomy", "domain_taxonomy.json"),
        ("--skill-taxonomy", "skill_taxonomy.json"),
        ("--examples", "examples.jsonl"),
        ("--mappings", "mappings.jsonl"),
        ("--occupations", "occupations.csv"),
        ("--importances", "importances.csv"),
        ("--digital-labels", "digital_labels.csv"),
        ("--workflows", "workflows.jsonl"),
    ] {
        v.push(flag.to_string());
        match replace.iter().find(|(f, _)| *f == flag) {
            Some((_, p)) => v.push(p.display().to_string()),
            None => v.push(fixture_str(file)),
        }
    }
    v
}

/// Runs the CLI in-process and returns the exit code and the run
/// directory it created under `out`, if any.
pub fn run(out: &Path, args: &[String]) -> (i32, Option<PathBuf>) {
    let before: Vec<PathBuf> = dirs(out);
    let mut argv = vec!["atlas".to_string()];
    argv.extend(args.iter().cloned());
    argv.push("--out".into());
    argv.push(out.display().to_string());
    let code = atlas_cli::run(argv);
    let created = dirs(out).into_iter().find(|d| !before.contains(d));
    (code, created)
}

fn dirs(out: &Path) -> Vec<PathBuf> {
    match std::fs::read_dir(out) {
        Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.path()).collect(),
        Err(_) => Vec::new(),
    }
}

pub fn args(words: &[&str]) -> Vec<String> {
    words.iter().map(|s| s.to_string()).collect()
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}
