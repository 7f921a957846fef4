//! Command-line front end for the lasso phase-transition experiments.
//!
//! Subcommands: `solve` and `check` inspect one seeded instance, `sweep` runs
//! the Monte Carlo grid, `thresholds` reports the theoretical boundaries and
//! `validate` runs the statistical self-checks.

pub mod commands;
pub mod config;
pub mod emit;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use emit::{emit_results, Format};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "LPL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerical(#[from] lasso_lab::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 1 for usage and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) | CliError::Failed(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lasso-phase-lab",
    version,
    about = "Sign-recovery phase transitions of the lasso"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one seeded instance and report the estimate.
    Solve(CommonArgs),
    /// Evaluate the exact recovery conditions on one seeded instance.
    Check(CommonArgs),
    /// Run the Monte Carlo sweep over (p, theta).
    Sweep(CommonArgs),
    /// Print the theoretical sample-size thresholds.
    Thresholds(CommonArgs),
    /// Compare simulated moments with their closed forms.
    Validate(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write results here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Overrides the base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of trials per cell (or replications for `validate`).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Suppress progress messages on standard error.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    #[default]
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

/// Worker threads from [`THREADS_ENV`], else the available parallelism.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match commands::execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
