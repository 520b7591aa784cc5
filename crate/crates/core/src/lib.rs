//! Steady axisymmetric vortex rings by energy maximisation over rearrangements.
//!
//! The crate discretises the meridional half-plane, inverts the axisymmetric
//! Laplace-type operator, iterates the rearrangement map to a fixed point and
//! compares the result against thin-core asymptotics.

pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod field;
pub mod fit;
pub mod flow;
pub mod greens;
pub mod oracles;
pub mod rearrangement;
pub mod solver;

pub use diagnostics::{DiagnosticsRecord, RunParams};
pub use domain::{Grid, MeridionalDomain, TruncationBox};
pub use error::{Result, RingError};
pub use field::StreamField;
pub use fit::{fit_scalings, FitReport, SweepResult};
pub use rearrangement::{
    solve_fixed_point, BackgroundFlow, BackgroundMode, FixedPointState, InitStrategy, PotentialVorticity, Tolerances,
};
pub use solver::{apply_l, solve_k, EllipticSolver, SolveReport};
