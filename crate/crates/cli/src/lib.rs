//! Batch front end for the `slm-core` experiments.
//!
//! Each invocation runs one experiment, writes its table as CSV and prints a
//! one-line summary carrying the 3-standard-error verdicts. Exit codes: 0 on
//! success, 1 for argument or I/O errors, 2 for numerical diagnostics.

// Negated comparisons are how argument checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
pub mod output;

use std::ffi::OsString;
use std::io::{self, Write};

use clap::Parser;

pub use output::{emit_csv, format_number, write_csv, Cell};

/// Failure of one invocation, mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Argument(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<slm_core::Error> for CliError {
    fn from(e: slm_core::Error) -> Self {
        if e.is_argument() {
            CliError::Argument(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Table and summary produced by one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: String,
}

/// Runs one command with process stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs one command, writing the summary (and the CSV when no `--out` is given) to `out`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match execute(argv, out) {
        Ok(()) => 0,
        Err(Failure::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            code
        }
        Err(Failure::Cli(e)) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

enum Failure {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Cli(e)
    }
}

fn execute(argv: Vec<OsString>, out: &mut dyn Write) -> Result<(), Failure> {
    let argv = config::merge_config(argv)?;
    let cli = args::Cli::try_parse_from(argv).map_err(Failure::Clap)?;
    let report = commands::dispatch(cli.command, &cli.opts)?;
    let io_err = |e: io::Error| CliError::Argument(format!("cannot write output: {e}"));
    match &cli.opts.out {
        Some(path) => {
            emit_csv(&report.rows, &report.header, path)
                .map_err(|e| CliError::Argument(format!("cannot write {}: {e}", path.display())))?;
            writeln!(out, "{}", report.summary).map_err(io_err)?;
        }
        None => {
            write_csv(&mut *out, &report.header, &report.rows).map_err(io_err)?;
            writeln!(out, "# {}", report.summary).map_err(io_err)?;
        }
    }
    Ok(())
}
