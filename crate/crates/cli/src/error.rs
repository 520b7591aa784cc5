use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use vortex_ring::RingError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error(transparent)]
    Ring(#[from] RingError),

    #[error("report inputs: {0}")]
    Report(String),
}

/// Machine-readable form written to stderr and, when possible, to `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Report(_) => 4,
            CliError::Ring(e) => match e {
                RingError::Infeasible { .. } => 2,
                RingError::InvalidDomain(_)
                | RingError::InvalidBox(_)
                | RingError::InvalidGrid(_)
                | RingError::InvalidParameter(_)
                | RingError::UndefinedRStar(_) => 1,
                _ => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Report(_) => "report_inputs",
            CliError::Ring(e) => match e {
                RingError::Infeasible { .. } => "infeasible",
                RingError::InsufficientSweep(_) => "insufficient_sweep",
                RingError::NonConvergence { .. } => "non_convergence",
                RingError::SolverFailure { .. } => "solver_failure",
                RingError::UnderResolved(_) => "under_resolved",
                _ if self.exit_code() == 1 => "invalid_input",
                _ => "numerical",
            },
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            kind: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        }
    }
}
