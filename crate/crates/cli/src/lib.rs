//! Command-line driver: `generate`, `train`, `evaluate`, `sweep` and
//! `export-copula`.
//!
//! Every command takes an optional JSON config; flags override it. Exit
//! codes: 0 success, 2 configuration error, 3 I/O or unreadable input,
//! 4 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;

mod commands;
mod config;

pub use config::{
    parse_config, EvaluateConfig, ExportConfig, GenerateConfig, Provenance, SweepCmdConfig,
    TrainCmdConfig, TruthModel,
};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "DEPCENS_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        source: depcens::Error,
    },

    #[error(transparent)]
    Core(#[from] depcens::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Input { .. } => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(depcens::Error::Io(_)) | CliError::Core(depcens::Error::Csv(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "depcens",
    version,
    about = "Survival models under dependent censoring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: commands::Command,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn input_err(path: &Path) -> impl FnOnce(depcens::Error) -> CliError + '_ {
    move |source| match source {
        e if e.is_numerical() => CliError::Core(e),
        e => CliError::Input {
            path: path.to_path_buf(),
            source: e,
        },
    }
}
