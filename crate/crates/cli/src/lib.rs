//! Command-line front end: argument and config handling, input loading,
//! run bundles and the subcommands themselves.

pub mod args;
pub mod bundle;
pub mod commands;
pub mod error;
pub mod inputs;
pub mod validate;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command, Options, Settings};
use crate::bundle::Bundle;
use crate::error::{CliError, CliResult, ExitKind};

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitKind::Config.code() } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.kind.code()
        }
    }
}

fn run_cli(cli: Cli) -> CliResult<std::path::PathBuf> {
    let file = match &cli.config {
        Some(path) => Options::from_toml_file(path)?,
        None => Options::default(),
    };
    let settings = Settings::resolve(&cli.command, cli.options.or(file))?;
    commands::check_required(&cli.command, &settings)?;

    let report = validate::validate_inputs(&settings);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Command::Validate = cli.command {
        let mut b = Bundle::create(&settings.out, cli.command.name())?;
        b.json("validation.json", &report)?;
        let dir = b.finish(&settings)?;
        if !report.is_clean() {
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            println!("{}", dir.display());
            return Err(CliError::input(format!("{} violation(s) found", report.violations.len())));
        }
        return Ok(dir);
    }
    if !report.is_clean() {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        return Err(CliError::input(format!(
            "{} input violation(s); run `atlas validate` for the full report",
            report.violations.len()
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallelism)
        .build()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    let mut b = Bundle::create(&settings.out, cli.command.name())?;
    let outcome = pool.install(|| commands::execute(&cli.command, &settings, &mut b));
    if let Err(e) = &outcome {
        b.note(format!("run failed: {}", e.message));
    }
    let dir = b.finish(&settings)?;
    outcome.map(|()| dir)
}
