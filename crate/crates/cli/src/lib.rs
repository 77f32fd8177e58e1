//! Scenario-driven front end: config ingestion, subcommands and the files
//! they leave behind.

use std::path::{Path, PathBuf};

use qdnls::diagnostics::DiagnosticsError;
use qdnls::nullforms::NullFormError;
use qdnls::problem::ProblemError;
use qdnls::solver::SolverError;
use thiserror::Error;

pub mod commands;
pub mod rundir;
pub mod scenario;

pub use commands::Report;
pub use scenario::Scenario;

/// Exit status for a numerical-acceptance failure.
pub const EXIT_CHECK_FAILED: i32 = 3;
/// Exit status for a run that blew up or reached the box boundary.
pub const EXIT_INTERRUPTED: i32 = 4;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run directory {0} has no manifest (run `simulate` first)")]
    MissingRun(PathBuf),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    NullForm(#[from] NullFormError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingRun(_) | CliError::Problem(_) => EXIT_INVALID,
            CliError::Solver(SolverError::InvalidConfig(_) | SolverError::UnknownFamily(_)) => EXIT_INVALID,
            CliError::Solver(SolverError::BlowUpSuspected { .. }) => EXIT_INTERRUPTED,
            CliError::Diagnostics(DiagnosticsError::Interrupted(_)) => EXIT_INTERRUPTED,
            CliError::Diagnostics(
                DiagnosticsError::InsufficientSamples { .. }
                | DiagnosticsError::NarrowWindow { .. }
                | DiagnosticsError::Mismatch(_)
                | DiagnosticsError::BadScan,
            ) => EXIT_INVALID,
            CliError::Diagnostics(DiagnosticsError::NonPositive { .. }) => EXIT_CHECK_FAILED,
            _ => 1,
        }
    }
}
