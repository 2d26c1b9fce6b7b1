use std::collections::BTreeMap;
use std::path::Path;

use atlas_core::annotator::{Annotator, RecordingAnnotator, RetryPolicy};
use atlas_core::autonomy::{
    advise, autonomy_level, success_rates, task_groups, validate_ordering, Attribution, AutonomyCurve, AutonomyParams,
    ConfidenceMode, Grouping,
};
use atlas_core::coverage::{breadth, coverage, effort_by_node, level_coverage, EffortDistribution, GroupLevel};
use atlas_core::economics::{
    alignment_report, digital_share, domain_employment_capital, effective_skill_employment_capital,
    label_tasks_digital, load_digital_labels, load_importances, load_occupations, write_digital_labels, AlignmentRow,
    DigitalLabel, OccupationStats, OccupationTask,
};
use atlas_core::mapping::{
    map_corpus, map_example, mapping_outcome_stats, write_jsonl, MappingRecord, MappingResult, TaskExample,
};
use atlas_core::sampler::{build_pool, permutation_sensitivity, sample_until_saturation, Distribution, PoolItem, SamplingParams};
use atlas_core::{ExampleKey, Taxonomy, TaxonomyKind};
use serde_json::json;

use crate::args::{Command, Settings};
use crate::bundle::{num, opt_num, Axis, Bundle, HeatmapData, PlotData, Point, Series};
use crate::error::{CliError, CliResult};
use crate::inputs;

pub const ALL_BENCHMARKS: &str = "all";

pub fn execute(command: &Command, s: &Settings, b: &mut Bundle) -> CliResult<()> {
    match command {
        Command::Map => map(s, b),
        Command::Coverage => coverage_tables(s, b),
        Command::Sample => sample(s, b),
        Command::Economics => economics(s, b),
        Command::Autonomy => autonomy(s, b),
        Command::Advise(_) => advise_task(s, b),
        Command::Report => report(s, b),
        Command::Validate => Ok(()),
    }
}

/// Fails early, before any run directory exists, when an input the
/// subcommand cannot do without is missing.
pub fn check_required(command: &Command, s: &Settings) -> CliResult<()> {
    let need: &[(&Option<std::path::PathBuf>, &str)] = match command {
        Command::Map => &[(&s.domain_taxonomy, "domain-taxonomy"), (&s.skill_taxonomy, "skill-taxonomy"), (&s.examples, "examples")],
        Command::Coverage | Command::Sample | Command::Report => {
            &[(&s.domain_taxonomy, "domain-taxonomy"), (&s.skill_taxonomy, "skill-taxonomy"), (&s.mappings, "mappings")]
        }
        Command::Economics => &[(&s.domain_taxonomy, "domain-taxonomy"), (&s.occupations, "occupations")],
        Command::Autonomy => &[(&s.workflows, "workflows")],
        Command::Advise(_) => &[
            (&s.domain_taxonomy, "domain-taxonomy"),
            (&s.skill_taxonomy, "skill-taxonomy"),
            (&s.mappings, "mappings"),
            (&s.workflows, "workflows"),
        ],
        Command::Validate => &[],
    };
    for (value, flag) in need {
        s.require(value, flag)?;
    }
    if matches!(command, Command::Map) && s.annotator.is_none() {
        return Err(CliError::config("`map` needs --annotator"));
    }
    Ok(())
}

fn kind_str(k: TaxonomyKind) -> String {
    k.as_str().to_string()
}

fn records(results: &[MappingResult], domain: &Taxonomy, skill: &Taxonomy) -> Vec<MappingRecord> {
    results
        .iter()
        .map(|r| {
            let t = match r.taxonomy_kind {
                TaxonomyKind::Domain => domain,
                TaxonomyKind::Skill => skill,
            };
            MappingRecord::from_result(r, t)
        })
        .collect()
}

fn outcome_table(b: &mut Bundle, results: &[MappingResult]) -> CliResult<()> {
    let rows: Vec<Vec<String>> = mapping_outcome_stats::<f64>(results)
        .into_iter()
        .map(|r| {
            vec![
                kind_str(r.taxonomy_kind),
                r.benchmark.unwrap_or_else(|| ALL_BENCHMARKS.to_string()),
                r.counts.total().to_string(),
                r.counts.mapped.to_string(),
                r.counts.empty.to_string(),
                r.counts.invalid.to_string(),
                num(r.mapped),
                num(r.empty),
                num(r.invalid),
            ]
        })
        .collect();
    b.table(
        "outcome_stats.csv",
        &["taxonomy", "benchmark", "examples", "mapped", "empty", "invalid", "mapped_share", "empty_share", "invalid_share"],
        &rows,
    )
}

fn map(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let domain = inputs::domain(s)?;
    let skill = inputs::skill(s)?;
    let examples = inputs::examples(s)?;
    let recorder = RecordingAnnotator::new(inputs::annotator(s)?);
    let mut results = Vec::new();
    let mut outcome = Ok(());
    for t in [&domain, &skill] {
        match map_corpus(&examples, t, &recorder, s.parallelism, RetryPolicy::default()) {
            Ok(m) => {
                if t.kind() == TaxonomyKind::Domain {
                    let rows: Vec<Vec<String>> = m
                        .rejected
                        .iter()
                        .map(|r| vec![r.example.benchmark.clone(), r.example.example_id.clone(), r.reason.clone()])
                        .collect();
                    b.table("rejected.csv", &["benchmark", "example_id", "reason"], &rows)?;
                }
                results.extend(m.results);
            }
            Err(abort) => {
                b.note(format!("{} mapping aborted: {}", t.kind(), abort.error));
                outcome = Err(CliError::annotator(abort.to_string()));
                results.extend(abort.partial);
                break;
            }
        }
    }
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &records(&results, &domain, &skill)).map_err(|e| CliError::internal(e.to_string()))?;
    b.write(if outcome.is_ok() { "mappings.jsonl" } else { "mappings_partial.jsonl" }, &buf)?;
    let mut recorded = recorder.recorded();
    recorded.sort_by(|a, b| a.key.cmp(&b.key));
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &recorded).map_err(|e| CliError::internal(e.to_string()))?;
    b.write("annotator_outputs.jsonl", &buf)?;
    if outcome.is_ok() {
        outcome_table(b, &results)?;
    }
    outcome
}

fn core_err(e: impl std::fmt::Display) -> CliError {
    CliError::input(e.to_string())
}

fn effort_rows(e: &EffortDistribution, t: &Taxonomy) -> Vec<Vec<String>> {
    let shares = e.shares::<f64>();
    t.nodes_at_level(e.group_level.depth())
        .map(|n| {
            vec![
                n.id().to_string(),
                n.label().to_string(),
                e.counts.get(n.id()).copied().unwrap_or(0).to_string(),
                num(shares.get(n.id()).copied().unwrap_or(0.0)),
            ]
        })
        .collect()
}

fn coverage_section(b: &mut Bundle, results: &[MappingResult], domain: &Taxonomy, skill: &Taxonomy) -> CliResult<()> {
    outcome_table(b, results)?;

    let mut cov_rows = Vec::new();
    let mut level_rows = Vec::new();
    let mut hist_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for t in [domain, skill] {
        let kind = kind_str(t.kind());
        let r = coverage::<f64>(results, t).map_err(core_err)?;
        cov_rows.push(vec![kind.clone(), ALL_BENCHMARKS.into(), r.covered_paths.len().to_string(), r.total_paths.to_string(), num(r.coverage)]);
        for (bench, c) in &r.per_benchmark {
            let covered = r.per_benchmark_covered.get(bench).copied().unwrap_or(0);
            cov_rows.push(vec![kind.clone(), bench.clone(), covered.to_string(), r.total_paths.to_string(), num(*c)]);
        }
        for level in 1..atlas_core::taxonomy::PATH_DEPTH {
            let l = level_coverage::<f64>(results, t, level).map_err(core_err)?;
            level_rows.push(vec![kind.clone(), level.to_string(), ALL_BENCHMARKS.into(), l.covered_nodes.len().to_string(), l.total_nodes.to_string(), num(l.coverage)]);
            for (bench, c) in &l.per_benchmark {
                let covered = l.per_benchmark_covered.get(bench).copied().unwrap_or(0);
                level_rows.push(vec![kind.clone(), level.to_string(), bench.clone(), covered.to_string(), l.total_nodes.to_string(), num(*c)]);
            }
        }
        let level = GroupLevel::for_kind(t.kind());
        let e = effort_by_node(results, t, level).map_err(core_err)?;
        b.table(&format!("effort_{kind}.csv"), &["node_id", "label", "examples", "share"], &effort_rows(&e, t))?;
        let br = breadth::<f64>(results, t, level).map_err(core_err)?;
        for (breadth, n) in &br.histogram {
            hist_rows.push(vec![kind.clone(), level.as_str().into(), breadth.to_string(), n.to_string()]);
        }
        summary_rows.push(vec![
            kind.clone(),
            level.as_str().into(),
            br.total_examples.to_string(),
            num(br.mean),
            num(br.mean_nonzero),
            num(br.share_zero),
            num(br.share_one),
            num(br.share_above_one),
            num(br.share_above_three),
            num(br.share_four_or_more),
        ]);
        if t.kind() == TaxonomyKind::Skill {
            let points = t
                .nodes_at_level(level.depth())
                .enumerate()
                .map(|(i, n)| Point {
                    id: n.id().into(),
                    label: n.label().into(),
                    x: i as f64,
                    y: e.counts.get(n.id()).copied().unwrap_or(0) as f64,
                })
                .collect();
            b.json(
                "plot_skill_distribution.json",
                &PlotData {
                    name: "examples per fine-grained skill".into(),
                    kind: "bar",
                    x_axis: Axis::new("skill leaf", "index in taxonomy order"),
                    y_axis: Axis::new("examples", "count"),
                    series: vec![Series { name: "all benchmarks".into(), points }],
                },
            )?;
        }
    }
    b.table("coverage.csv", &["taxonomy", "benchmark", "covered_paths", "total_paths", "coverage"], &cov_rows)?;
    b.table("level_coverage.csv", &["taxonomy", "level", "benchmark", "covered_nodes", "total_nodes", "coverage"], &level_rows)?;
    b.table("breadth_histogram.csv", &["taxonomy", "group_level", "breadth", "examples"], &hist_rows)?;
    b.table(
        "breadth_summary.csv",
        &["taxonomy", "group_level", "examples", "mean", "mean_nonzero", "share_zero", "share_one", "share_above_one", "share_above_three", "share_four_or_more"],
        &summary_rows,
    )
}

fn coverage_tables(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let domain = inputs::domain(s)?;
    let skill = inputs::skill(s)?;
    let results = inputs::mappings(s, &domain, &skill)?;
    coverage_section(b, &results, &domain, &skill)
}

/// Pools keyed by benchmark, plus the pooled corpus under [`ALL_BENCHMARKS`].
fn pools(results: &[MappingResult], domain: &Taxonomy, skill: &Taxonomy) -> CliResult<Vec<(String, Vec<PoolItem>)>> {
    let all = build_pool(results, domain, skill).map_err(core_err)?;
    let mut by_bench: BTreeMap<String, Vec<PoolItem>> = BTreeMap::new();
    for item in &all {
        by_bench.entry(item.example.benchmark.clone()).or_default().push(item.clone());
    }
    let mut out: Vec<(String, Vec<PoolItem>)> = by_bench.into_iter().collect();
    if out.len() > 1 {
        out.push((ALL_BENCHMARKS.to_string(), all));
    }
    Ok(out)
}

fn dist_cols(d: &Distribution, scale: f64) -> [String; 3] {
    [num(d.mean * scale), num(d.lo * scale), num(d.hi * scale)]
}

fn sample_section(s: &Settings, b: &mut Bundle, results: &[MappingResult], domain: &Taxonomy, skill: &Taxonomy) -> CliResult<()> {
    let params = SamplingParams::new(s.batch_size, s.delta);
    let mut trace_rows = Vec::new();
    let mut sens_rows = Vec::new();
    let mut run_rows = Vec::new();
    let mut selected_rows = Vec::new();
    for (bench, pool) in pools(results, domain, skill)? {
        let run = sample_until_saturation(&pool, domain, skill, &params, Some(s.seed)).map_err(core_err)?;
        for (i, (c, g)) in run.coverage_trace.iter().zip(&run.gains).enumerate() {
            trace_rows.push(vec![
                bench.clone(),
                (i + 1).to_string(),
                ((i + 1) * s.batch_size).min(run.selected.len()).to_string(),
                num(c.domain * 100.0),
                num(c.skill * 100.0),
                num(g.domain),
                num(g.skill),
            ]);
        }
        for (i, k) in run.selected.iter().enumerate() {
            selected_rows.push(vec![bench.clone(), (i + 1).to_string(), k.benchmark.clone(), k.example_id.clone()]);
        }
        let sum = permutation_sensitivity(&pool, domain, skill, &params, s.permutations, s.seed).map_err(core_err)?;
        let mut row = vec![bench.clone(), sum.pool_size.to_string(), sum.permutations.to_string(), sum.seed.to_string()];
        row.extend(dist_cols(&sum.stop_size, 1.0));
        row.extend([num(sum.stop_size.mean_lo), num(sum.stop_size.mean_hi)]);
        row.extend(dist_cols(&sum.coverage.domain, 100.0));
        row.extend(dist_cols(&sum.coverage.skill, 100.0));
        for d in [&sum.chao1_coverage.domain, &sum.chao1_coverage.skill] {
            match d {
                Some(d) => row.extend(dist_cols(d, 100.0)),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        row.extend([num(sum.pool_coverage.domain * 100.0), num(sum.pool_coverage.skill * 100.0)]);
        sens_rows.push(row);
        for (i, r) in sum.runs.iter().enumerate() {
            run_rows.push(vec![
                bench.clone(),
                (i + 1).to_string(),
                r.seed.to_string(),
                r.stop_size.to_string(),
                format!("{:?}", r.stop_reason).to_lowercase(),
                num(r.coverage.domain * 100.0),
                num(r.coverage.skill * 100.0),
                opt_num(r.chao1_coverage.domain.map(|v| v * 100.0)),
                opt_num(r.chao1_coverage.skill.map(|v| v * 100.0)),
            ]);
        }
    }
    b.table(
        "sampling_trace.csv",
        &["benchmark", "batch", "selected", "domain_coverage_pct", "skill_coverage_pct", "domain_gain_pp", "skill_gain_pp"],
        &trace_rows,
    )?;
    b.table("sampling_selected.csv", &["pool", "order", "benchmark", "example_id"], &selected_rows)?;
    b.table(
        "sensitivity.csv",
        &[
            "benchmark", "pool_size", "permutations", "seed",
            "stop_size_mean", "stop_size_lo", "stop_size_hi", "stop_size_mean_ci_lo", "stop_size_mean_ci_hi",
            "domain_coverage_pct_mean", "domain_coverage_pct_lo", "domain_coverage_pct_hi",
            "skill_coverage_pct_mean", "skill_coverage_pct_lo", "skill_coverage_pct_hi",
            "chao1_domain_coverage_pct_mean", "chao1_domain_coverage_pct_lo", "chao1_domain_coverage_pct_hi",
            "chao1_skill_coverage_pct_mean", "chao1_skill_coverage_pct_lo", "chao1_skill_coverage_pct_hi",
            "pool_domain_coverage_pct", "pool_skill_coverage_pct",
        ],
        &sens_rows,
    )?;
    b.table(
        "permutation_runs.csv",
        &["benchmark", "permutation", "seed", "stop_size", "stop_reason", "domain_coverage_pct", "skill_coverage_pct", "chao1_domain_coverage_pct", "chao1_skill_coverage_pct"],
        &run_rows,
    )
}

fn sample(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let domain = inputs::domain(s)?;
    let skill = inputs::skill(s)?;
    let results = inputs::mappings(s, &domain, &skill)?;
    sample_section(s, b, &results, &domain, &skill)
}

/// Reads `soc_code,task_text` rows.
pub fn read_occupation_tasks(path: &Path) -> CliResult<Vec<(String, String)>> {
    let err = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(err)?;
    let headers = rdr.headers().map_err(err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("{}: missing `{name}` column", path.display())))
    };
    let (soc, text) = (col("soc_code")?, col("task_text")?);
    rdr.records()
        .map(|r| {
            let r = r.map_err(err)?;
            Ok((r.get(soc).unwrap_or("").to_string(), r.get(text).unwrap_or("").to_string()))
        })
        .collect()
}

fn alignment_rows(rows: &[AlignmentRow<f64>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.node_id.clone(),
                r.label.clone(),
                r.effort_count.to_string(),
                num(r.effort_share),
                num(r.employment_share),
                num(r.capital_share),
                opt_num(r.digital_share),
                opt_num(r.effort_to_employment),
            ]
        })
        .collect()
}

const ALIGNMENT_HEADER: [&str; 8] = [
    "node_id", "label", "examples", "effort_share", "employment_share", "capital_share", "digital_share", "effort_to_employment",
];

fn scatter_series(name: &str, rows: &[AlignmentRow<f64>]) -> Series {
    Series {
        name: name.into(),
        points: rows
            .iter()
            .map(|r| Point { id: r.node_id.clone(), label: r.label.clone(), x: r.employment_share, y: r.effort_share })
            .collect(),
    }
}

fn digital_labels(s: &Settings, b: &mut Bundle, occ: &[OccupationStats<f64>]) -> CliResult<Option<Vec<DigitalLabel>>> {
    if let Some(path) = s.digital_labels.as_deref() {
        return load_digital_labels(path).map(Some).map_err(core_err);
    }
    let Some(path) = s.occupation_tasks.as_deref() else { return Ok(None) };
    let titles: BTreeMap<&str, &str> = occ.iter().map(|o| (o.soc_code.as_str(), o.title.as_str())).collect();
    let tasks: Vec<OccupationTask> = read_occupation_tasks(path)?
        .into_iter()
        .map(|(soc, text)| OccupationTask {
            occupation: titles.get(soc.as_str()).copied().unwrap_or(soc.as_str()).to_string(),
            soc_code: soc,
            task_text: text,
        })
        .collect();
    let annotator = inputs::annotator(s)?;
    let out = label_tasks_digital(&tasks, &annotator, RetryPolicy::default())
        .map_err(|e| CliError::annotator(format!("digital labeling: {e}")))?;
    let mut buf = Vec::new();
    write_digital_labels(&mut buf, &out.labels).map_err(|e| CliError::internal(e.to_string()))?;
    b.write("digital_labels.csv", &buf)?;
    let rows: Vec<Vec<String>> =
        out.unlabeled.iter().map(|u| vec![u.task.soc_code.clone(), u.task.task_text.clone(), u.raw.clone()]).collect();
    b.table("digital_unlabeled.csv", &["soc_code", "task_text", "raw"], &rows)?;
    Ok(Some(out.labels))
}

fn economics_section(s: &Settings, b: &mut Bundle, domain: &Taxonomy, skill: Option<&Taxonomy>, results: Option<&[MappingResult]>) -> CliResult<()> {
    let occ_path = s.require(&s.occupations, "occupations")?;
    let occ = load_occupations::<f64>(occ_path).map_err(core_err)?;
    let fam = domain_employment_capital(&occ, domain).map_err(core_err)?;
    let share = |x: f64, total: f64| if total > 0.0 { x / total } else { 0.0 };
    let rows: Vec<Vec<String>> = fam
        .rows
        .iter()
        .map(|r| {
            vec![
                r.node_id.clone(),
                r.label.clone(),
                r.occupations.to_string(),
                num(r.employment),
                num(r.capital),
                num(share(r.employment, fam.total_employment)),
                num(share(r.capital, fam.total_capital)),
            ]
        })
        .collect();
    b.table("family_economics.csv", &["node_id", "label", "occupations", "employment", "capital", "employment_share", "capital_share"], &rows)?;
    let mut unmatched: Vec<Vec<String>> = fam.unmatched.iter().map(|c| vec!["occupations".into(), c.clone()]).collect();

    let skill_table = match (s.importances.as_deref(), skill) {
        (Some(path), Some(skill)) => {
            let imp = load_importances::<f64>(path).map_err(core_err)?;
            let t = effective_skill_employment_capital(&occ, &imp, skill).map_err(core_err)?;
            let rows: Vec<Vec<String>> = t
                .nodes
                .iter()
                .map(|r| {
                    vec![r.node_id.clone(), r.label.clone(), r.level.to_string(), r.occupations.to_string(), num(r.employment), num(r.capital)]
                })
                .collect();
            b.table("skill_economics.csv", &["node_id", "label", "level", "occupations", "effective_employment", "effective_capital"], &rows)?;
            b.note(format!("skill_economics.csv: {}", t.note));
            unmatched.extend(t.unmatched.iter().map(|c| vec!["importances".into(), c.clone()]));
            Some(t.leaf_table())
        }
        (Some(_), None) => return Err(CliError::config("--importances needs --skill-taxonomy")),
        _ => None,
    };

    let digital = match digital_labels(s, b, &occ)? {
        Some(labels) => {
            let d = digital_share(&labels, &occ, domain).map_err(core_err)?;
            let rows: Vec<Vec<String>> = d
                .occupations
                .iter()
                .map(|o| vec![o.soc_code.clone(), o.digital.to_string(), o.total.to_string(), num(o.ratio)])
                .collect();
            b.table("digital_occupations.csv", &["soc_code", "digital_tasks", "labeled_tasks", "digital_share"], &rows)?;
            let rows: Vec<Vec<String>> = d
                .families
                .iter()
                .map(|f| {
                    vec![
                        f.node_id.clone(),
                        f.label.clone(),
                        f.occupations.to_string(),
                        opt_num(f.employment_weighted),
                        opt_num(f.capital_weighted),
                        opt_num(f.unweighted),
                    ]
                })
                .collect();
            b.table(
                "digital_families.csv",
                &["node_id", "label", "occupations", "employment_weighted", "capital_weighted", "unweighted"],
                &rows,
            )?;
            for soc in &d.excluded {
                b.note(format!("occupation {soc} has no labeled tasks and is left out of digital shares"));
            }
            unmatched.extend(d.unmatched.iter().map(|c| vec!["digital_labels".into(), c.clone()]));
            Some(d.by_family())
        }
        None => None,
    };
    b.table("unmatched_soc_codes.csv", &["source", "soc_code"], &unmatched)?;

    let Some(results) = results else {
        b.note("no mappings supplied; alignment tables skipped");
        return Ok(());
    };
    let effort = effort_by_node(results, domain, GroupLevel::DomainFamily).map_err(core_err)?;
    let fam_rows = alignment_report(&effort, &fam, digital.as_ref()).map_err(core_err)?;
    b.table("alignment_domain.csv", &ALIGNMENT_HEADER, &alignment_rows(&fam_rows))?;
    let mut series = vec![scatter_series("job families", &fam_rows)];
    if let (Some(table), Some(skill)) = (&skill_table, skill) {
        let effort = effort_by_node(results, skill, GroupLevel::SkillLeaf).map_err(core_err)?;
        let rows = alignment_report(&effort, table, None).map_err(core_err)?;
        b.table("alignment_skill.csv", &ALIGNMENT_HEADER, &alignment_rows(&rows))?;
        series.push(scatter_series("skill leaves (importance-weighted)", &rows));
    }
    b.json(
        "plot_effort_vs_employment.json",
        &PlotData {
            name: "benchmark effort against employment".into(),
            kind: "scatter",
            x_axis: Axis::new("employment share", "fraction"),
            y_axis: Axis::new("effort share", "fraction of example incidences"),
            series,
        },
    )
}

fn economics(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let domain = inputs::domain(s)?;
    let skill = s.skill_taxonomy.as_ref().map(|_| inputs::skill(s)).transpose()?;
    let results = match (&s.mappings, &skill) {
        (Some(_), Some(sk)) => Some(inputs::mappings(s, &domain, sk)?),
        (Some(_), None) => return Err(CliError::config("--mappings needs --skill-taxonomy as well")),
        _ => None,
    };
    economics_section(s, b, &domain, skill.as_ref(), results.as_deref())
}

struct AutonomyInputs {
    workflows: Vec<atlas_core::WorkflowDoc>,
    attribution: Option<Attribution>,
}

fn autonomy_inputs(s: &Settings) -> CliResult<AutonomyInputs> {
    let workflows = inputs::workflows(s)?;
    let attribution = match (&s.mappings, &s.domain_taxonomy, &s.skill_taxonomy) {
        (Some(_), Some(_), Some(_)) => {
            let domain = inputs::domain(s)?;
            let skill = inputs::skill(s)?;
            let results = inputs::mappings(s, &domain, &skill)?;
            Some(Attribution::from_results(&results, &domain, &skill))
        }
        _ => None,
    };
    Ok(AutonomyInputs { workflows, attribution })
}

fn groupings(s: &Settings, attributed: bool) -> CliResult<Vec<Grouping>> {
    match &s.grouping {
        Some(g) => {
            if let Some(bad) = g.iter().find(|g| matches!(g, Grouping::DomainFamily | Grouping::SkillCategory) && !attributed) {
                return Err(CliError::config(format!(
                    "grouping by {bad} needs --mappings, --domain-taxonomy and --skill-taxonomy"
                )));
            }
            Ok(g.clone())
        }
        None => Ok(Grouping::ALL
            .into_iter()
            .filter(|g| attributed || !matches!(g, Grouping::DomainFamily | Grouping::SkillCategory))
            .collect()),
    }
}

fn params(s: &Settings, mode: ConfidenceMode) -> CliResult<AutonomyParams<f64>> {
    AutonomyParams::new(s.threshold, s.min_samples, mode).map_err(|e| CliError::config(e.to_string()))
}

fn flags(levels: &[usize]) -> String {
    levels.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn autonomy_section(s: &Settings, b: &mut Bundle, inp: &AutonomyInputs) -> CliResult<()> {
    let raw = params(s, ConfidenceMode::Raw)?;
    let lcb = params(s, ConfidenceMode::Lcb)?;
    let mut level_rows = Vec::new();
    for g in groupings(s, inp.attribution.is_some())? {
        let curves: Vec<AutonomyCurve<f64>> =
            success_rates(&inp.workflows, g, inp.attribution.as_ref()).map_err(core_err)?;
        let mut buf = Vec::new();
        atlas_core::autonomy::write_curves_csv(&mut buf, &curves).map_err(|e| CliError::internal(e.to_string()))?;
        b.write(&format!("curves_{g}.csv"), &buf)?;
        for c in &curves {
            let a_raw = autonomy_level(c, &raw);
            let a_lcb = autonomy_level(c, &lcb);
            level_rows.push(vec![
                g.to_string(),
                c.group.clone(),
                c.group_label.clone(),
                c.node_count().to_string(),
                a_raw.to_string(),
                flags(&a_raw.non_monotonic),
                a_lcb.to_string(),
                flags(&a_lcb.non_monotonic),
            ]);
        }
        let columns: Vec<usize> = curves
            .iter()
            .flat_map(|c| c.levels.keys().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        b.json(
            &format!("plot_autonomy_heatmap_{g}.json"),
            &HeatmapData {
                name: format!("success rate by complexity and {g}"),
                kind: "heatmap",
                row_axis: Axis::new(g.as_str(), "group"),
                column_axis: Axis::new("complexity", "granular steps"),
                value_axis: Axis::new("success rate", "fraction"),
                rows: curves.iter().map(|c| c.group_label.clone()).collect(),
                values: curves
                    .iter()
                    .map(|c| columns.iter().map(|k| c.levels.get(k).map(|l| l.sr)).collect())
                    .collect(),
                counts: curves
                    .iter()
                    .map(|c| columns.iter().map(|k| c.levels.get(k).map_or(0, |l| l.totals)).collect())
                    .collect(),
                columns,
            },
        )?;
    }
    b.table(
        "autonomy_levels.csv",
        &["grouping", "group", "label", "nodes", "autonomy_raw", "non_monotonic_raw", "autonomy_lcb", "non_monotonic_lcb"],
        &level_rows,
    )?;
    b.note(format!(
        "autonomy threshold {} with at least {} nodes per level; the selected mode is {}",
        s.threshold,
        s.min_samples,
        s.confidence_mode.as_str()
    ));

    if s.ordering_pairs > 0 {
        let judge = inputs::annotator(s)?;
        let report = validate_ordering::<f64, _>(&inp.workflows, s.ordering_pairs, &judge, RetryPolicy::default(), s.seed)
            .map_err(|e| match e {
                atlas_core::autonomy::AutonomyError::Judge(e) => CliError::annotator(e.to_string()),
                other => CliError::input(other.to_string()),
            })?;
        let rows: Vec<Vec<String>> = report
            .judgments
            .iter()
            .enumerate()
            .map(|(i, j)| {
                vec![
                    (i + 1).to_string(),
                    j.shallow_level.to_string(),
                    j.shallow.clone(),
                    j.deep.clone(),
                    if j.deep_first { "deep".into() } else { "shallow".into() },
                    match j.verdict {
                        Some(true) => "affirmed".into(),
                        Some(false) => "rejected".into(),
                        None => "unparseable".into(),
                    },
                    j.raw.clone(),
                ]
            })
            .collect();
        b.table("ordering_judgments.csv", &["pair", "shallow_level", "shallow", "deep", "shown_first", "verdict", "raw"], &rows)?;
        b.json(
            "ordering_summary.json",
            &json!({
                "pairs": report.judgments.len(),
                "judged": report.judged,
                "affirmed": report.affirmed,
                "unparseable": report.unparseable,
                "fraction": report.fraction,
                "seed": s.seed,
            }),
        )?;
    }
    Ok(())
}

fn autonomy(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let inp = autonomy_inputs(s)?;
    autonomy_section(s, b, &inp)
}

fn advise_task(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let args = s.advise.as_ref().ok_or_else(|| CliError::internal("advise arguments missing"))?;
    let domain = inputs::domain(s)?;
    let skill = inputs::skill(s)?;
    let results = inputs::mappings(s, &domain, &skill)?;
    let attribution = Attribution::from_results(&results, &domain, &skill);
    let workflows = inputs::workflows(s)?;
    let grouping = match s.grouping.as_deref() {
        None | Some([]) => Grouping::DomainFamily,
        Some([g]) if matches!(g, Grouping::DomainFamily | Grouping::SkillCategory) => *g,
        Some(_) => return Err(CliError::config("advise takes one grouping: domain_family or skill_category")),
    };
    let taxonomy = if grouping == Grouping::DomainFamily { &domain } else { &skill };

    let recorded = args.example_id.as_ref().and_then(|id| {
        results.iter().find(|r| {
            r.taxonomy_kind == taxonomy.kind() && r.example.example_id == *id && r.example.benchmark == args.benchmark
        })
    });
    let (task, mapping) = match (recorded, &args.instruction) {
        (Some(r), _) => (r.example.clone(), r.clone()),
        (None, Some(text)) => {
            let id = args.example_id.clone().unwrap_or_else(|| "query".into());
            let example = TaskExample::new(args.benchmark.clone(), id, text.clone());
            let annotator: Box<dyn Annotator> = inputs::annotator(s)?;
            let r = map_example(&example, taxonomy, &taxonomy.flatten_for_prompt(), &annotator, RetryPolicy::default())
                .map_err(|e| CliError::annotator(e.to_string()))?;
            (example.key(), r)
        }
        (None, None) => {
            return Err(CliError::config("advise needs --instruction or an --example-id present in --mappings"))
        }
    };
    let groups = task_groups(&mapping, grouping);
    if groups.is_empty() {
        return Err(CliError::input(format!(
            "task {task} maps to no {grouping} group (mapping status {})",
            mapping.status.as_str()
        )));
    }
    let curves = success_rates::<f64>(&workflows, grouping, Some(&attribution)).map_err(core_err)?;
    let p = params(s, s.confidence_mode)?;
    let advice = advise(task.clone(), &groups, args.complexity, &curves, &p).map_err(core_err)?;
    let consulted: Vec<_> = advice
        .consulted
        .iter()
        .map(|c| {
            json!({
                "group": c.group,
                "label": c.group_label,
                "successes": c.at_estimate.as_ref().map(|l| l.successes),
                "totals": c.at_estimate.as_ref().map(|l| l.totals),
                "sr": c.at_estimate.as_ref().map(|l| l.sr),
                "lcb": c.at_estimate.as_ref().map(|l| l.lcb),
                "passes": c.passes,
                "highest_passing_lower_level": c.best_lower,
            })
        })
        .collect();
    let record = json!({
        "task": task_json(&task),
        "grouping": grouping.as_str(),
        "matched_groups": advice.matched_groups,
        "estimated_complexity": advice.estimated_complexity,
        "threshold": advice.threshold,
        "min_samples": s.min_samples,
        "confidence_mode": s.confidence_mode.as_str(),
        "decision": advice.decision.as_str(),
        "consulted": consulted,
    });
    println!("{}", advice.decision.as_str());
    b.json("advice.json", &record)
}

fn task_json(k: &ExampleKey) -> serde_json::Value {
    json!({ "benchmark": k.benchmark, "example_id": k.example_id })
}

fn report(s: &Settings, b: &mut Bundle) -> CliResult<()> {
    let domain = inputs::domain(s)?;
    let skill = inputs::skill(s)?;
    let results = inputs::mappings(s, &domain, &skill)?;
    coverage_section(b, &results, &domain, &skill)?;
    sample_section(s, b, &results, &domain, &skill)?;
    if s.occupations.is_some() {
        economics_section(s, b, &domain, Some(&skill), Some(&results))?;
    } else {
        b.note("no occupation data supplied; economics skipped");
    }
    if s.workflows.is_some() {
        let inp = AutonomyInputs {
            workflows: inputs::workflows(s)?,
            attribution: Some(Attribution::from_results(&results, &domain, &skill)),
        };
        autonomy_section(s, b, &inp)?;
    } else {
        b.note("no workflows supplied; autonomy skipped");
    }
    Ok(())
}
