use thiserror::Error;

/// Errors produced by the vortex-ring laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("non-admissible domain: {0}")]
    InvalidDomain(String),

    #[error("invalid truncation box: {0}")]
    InvalidBox(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty point set")]
    EmptySet,

    #[error("empty vortex core: all weights are zero")]
    EmptyCore,

    #[error("singular elliptic modulus k = {0} (require 0 <= k < 1)")]
    SingularModulus(f64),

    #[error("kernel evaluated at coincident points")]
    SingularEvaluation,

    #[error("points are outside the range of the near-diagonal expansion (separation {separation}, limit {limit})")]
    OutOfExpansionRange { separation: f64, limit: f64 },

    #[error("unsupported backend: {0}")]
    UnsupportedBackend(String),

    #[error("elliptic solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("infeasible mass constraint: requested nu-mass {requested:e} exceeds available {available:e} (need lambda > 1/|D|)")]
    Infeasible { requested: f64, available: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last support differences {last_diffs:?})")]
    NonConvergence {
        iterations: usize,
        last_diffs: [f64; 2],
    },

    #[error("r* is undefined: {0}")]
    UndefinedRStar(String),

    #[error("under-resolved core: {0}")]
    UnderResolved(String),

    #[error("insufficient sweep: {0} points, at least 4 required")]
    InsufficientSweep(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, RingError>;
