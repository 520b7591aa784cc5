//! Batch front end of the vortex-ring laboratory: configuration, the
//! `solve`/`sweep`/`report` commands and their CSV, JSON and SVG artifacts.

pub mod commands;
pub mod config;
pub mod contour;
pub mod error;

pub use commands::{cmd_report, cmd_solve, cmd_sweep};
pub use config::RunConfig;
pub use error::CliError;
