//! Command-line front end: argument parsing, configuration merging, the
//! verify suites, and JSON/CSV output.

// `!(x >= 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Table code indexes several arrays by the same loop variable.
#![allow(clippy::needless_range_loop)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suites;

use std::ffi::OsString;

use clap::Parser;

use crate::args::Cli;
use crate::config::RunConfig;
use crate::error::{validation, CliError, CliResult, EXIT_VALIDATION};

/// Caps the worker threads used by the parallel loops.
pub const THREADS_ENV: &str = "RECTBOUND_THREADS";

fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(validation(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(validation(format!("{THREADS_ENV} = {v:?}; need a positive integer"))),
        },
    }
}

fn run_parsed(cli: Cli) -> CliResult<i32> {
    let (command, config_path, flags) = cli.into_parts();
    let file = match &config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &file.command {
        if *c != command {
            return Err(validation(format!("config file is for `{c}`, not `{command}`")));
        }
    }
    let cfg = flags.overlay(file);
    match thread_cap()? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Internal(e.to_string()))?;
            pool.install(|| commands::execute(&command, cfg))
        }
        None => commands::execute(&command, cfg),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match run_parsed(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rectbound: {e}");
            e.exit_code()
        }
    }
}
