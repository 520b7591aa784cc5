//! Run configuration: a TOML file with `[domain]`, `[grid]`, `[physics]`,
//! `[solver]` and `[output]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vortex_ring::rearrangement::SupportBox;
use vortex_ring::{BackgroundMode, InitStrategy, MeridionalDomain, RunParams, Tolerances, TruncationBox};

use crate::error::CliError;

/// Environment variable overriding `[output] dir`.
pub const ENV_OUTPUT_DIR: &str = "VRING_OUTPUT_DIR";
/// Environment variable fixing the worker thread count.
pub const ENV_THREADS: &str = "VRING_THREADS";

/// Documentation of every key and its default, printed by `--help`.
pub const CONFIG_HELP: &str = "\
Configuration file (TOML):

  [domain]
  kind = \"half_plane\"     # half_plane | pipe | exterior_ball | disk | rectangle
  d = 1.0                 # pipe radius or ball radius (pipe, exterior_ball)
  b = 1.0                 # disk radius or cylinder radius (disk, rectangle)
  c = 1.0                 # cylinder half-height (rectangle)

  [grid]
  n_r = 128               # cells in r
  n_z = 256               # cells in z (even)
  r_max = ...             # window; default: the bounding box, or 3 r* for unbounded domains
  z_max = ...

  [physics]
  w = 0.0                 # background speed parameter W
  background = ...        # scaled_uniform | fixed_uniform | none | exterior_ball_scaled;
                          # default: scaled_uniform (pipe, half_plane), exterior_ball_scaled, none
  lambda = 100.0          # vortex strength for `solve`
  lambdas = [...]         # geometric list of at least 4 strengths for `sweep`

  [solver]
  tol_e = 1e-9            # relative energy change
  tol_supp = 1e-6         # nu-mass of successive support differences
  max_iters = 200
  solver_tol = 1e-9       # relative residual of each elliptic solve
  init = \"scan\"           # scan | annulus | random
  init_r = ...            # annulus centre radius; default r*
  seed = 0                # seed for init = \"random\"
  symmetrize = true       # Steiner symmetrization in z after each step
  support_r_max = ...     # optional box restricting the core support
  support_z_max = ...

  [output]
  dir = \"vring_out\"       # must exist; overridden by VRING_OUTPUT_DIR
  fields = true           # fields.csv
  contours = true         # contours.svg
  diagnostics = true      # run_summary.json (sweeps: per-point summaries)
  timestamp = false       # embed a generation time in SVG metadata

Environment: VRING_OUTPUT_DIR overrides [output] dir, VRING_THREADS sets the worker count.
Exit codes: 0 success, 1 invalid input, 2 infeasible, 3 solver failure, 4 I/O.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    HalfPlane,
    Pipe,
    ExteriorBall,
    Disk,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainName,
    pub d: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_r: usize,
    pub n_z: usize,
    pub r_max: Option<f64>,
    pub z_max: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_r: 128,
            n_z: 256,
            r_max: None,
            z_max: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub w: f64,
    pub background: Option<BackgroundMode>,
    pub lambda: Option<f64>,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Scan,
    Annulus,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_e: f64,
    pub tol_supp: f64,
    pub max_iters: usize,
    pub solver_tol: f64,
    pub init: InitName,
    pub init_r: Option<f64>,
    pub seed: u64,
    pub symmetrize: bool,
    pub support_r_max: Option<f64>,
    pub support_z_max: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            tol_e: t.tol_e,
            tol_supp: t.tol_supp,
            max_iters: t.max_iters,
            solver_tol: t.solver,
            init: InitName::Scan,
            init_r: None,
            seed: 0,
            symmetrize: true,
            support_r_max: None,
            support_z_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub fields: bool,
    pub contours: bool,
    pub diagnostics: bool,
    pub timestamp: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("vring_out"),
            fields: true,
            contours: true,
            diagnostics: true,
            timestamp: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `path` and applies the output-directory override from the environment.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = std::env::var_os(ENV_OUTPUT_DIR) {
            cfg.output.dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn meridional_domain(&self) -> Result<MeridionalDomain, CliError> {
        let d = &self.domain;
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| CliError::Config(format!("[domain] {name} is required for {:?}", d.kind)))
        };
        let domain = match d.kind {
            DomainName::HalfPlane => MeridionalDomain::HalfPlane,
            DomainName::Pipe => MeridionalDomain::Pipe { d: need("d", d.d)? },
            DomainName::ExteriorBall => MeridionalDomain::ExteriorBall { d: need("d", d.d)? },
            DomainName::Disk => MeridionalDomain::Disk { b: need("b", d.b)? },
            DomainName::Rectangle => MeridionalDomain::Rectangle {
                b: need("b", d.b)?,
                c: need("c", d.c)?,
            },
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Parameters of one run at strength `lambda`.
    pub fn params(&self, lambda: f64) -> Result<RunParams, CliError> {
        let domain = self.meridional_domain()?;
        let mut p = RunParams::new(domain, lambda, self.physics.w, self.grid.n_r, self.grid.n_z)?;
        if self.grid.r_max.is_some() || self.grid.z_max.is_some() {
            p.window = TruncationBox::new(
                self.grid.r_max.unwrap_or(p.window.r_max),
                self.grid.z_max.unwrap_or(p.window.z_max),
            );
        }
        if let Some(bg) = self.physics.background {
            p.background = bg;
        }
        let s = &self.solver;
        p.tolerances = Tolerances {
            tol_e: s.tol_e,
            tol_supp: s.tol_supp,
            max_iters: s.max_iters,
            solver: s.solver_tol,
        };
        p.init = match s.init {
            InitName::Scan => InitStrategy::Scan,
            InitName::Annulus => InitStrategy::Annulus { r: s.init_r },
            InitName::Random => InitStrategy::Random { seed: s.seed },
        };
        p.symmetrize = s.symmetrize;
        p.support_box = match (s.support_r_max, s.support_z_max) {
            (None, None) => None,
            (Some(r_max), Some(z_max)) => Some(SupportBox { r_max, z_max }),
            _ => {
                return Err(CliError::Config(
                    "[solver] support_r_max and support_z_max must be given together".into(),
                ))
            }
        };
        p.grid()?;
        Ok(p)
    }

    /// The single strength of a `solve` run.
    pub fn solve_lambda(&self) -> Result<f64, CliError> {
        match (self.physics.lambda, self.physics.lambdas.as_slice()) {
            (Some(l), _) => Ok(l),
            (None, [l]) => Ok(*l),
            _ => Err(CliError::Config("[physics] lambda is required for solve".into())),
        }
    }

    /// The strengths of a `sweep`, ascending.
    pub fn sweep_lambdas(&self) -> Result<Vec<f64>, CliError> {
        let mut l = self.physics.lambdas.clone();
        if l.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(CliError::Config("[physics] lambdas must be positive".into()));
        }
        l.sort_by(f64::total_cmp);
        l.dedup();
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse("[domain]\nkind = \"disk\"\nb = 1.0\n[physics]\nlambda = 100.0\n").unwrap();
        assert_eq!(cfg.grid, GridSection::default());
        assert_eq!(cfg.solver, SolverSection::default());
        let p = cfg.params(100.0).unwrap();
        assert_eq!(p.domain, MeridionalDomain::Disk { b: 1.0 });
        assert_eq!(p.background, BackgroundMode::None);
        assert_eq!(p.window, TruncationBox::new(1.0, 1.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("[domain]\nkind = \"disk\"\nb = 1.0\nradius = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn missing_domain_parameter_is_reported() {
        let cfg = RunConfig::parse("[domain]\nkind = \"pipe\"\n").unwrap();
        let err = cfg.meridional_domain().unwrap_err();
        assert!(err.to_string().contains("d is required"));
    }

    #[test]
    fn overrides_reach_run_params() {
        let text = r#"
            [domain]
            kind = "half_plane"
            [grid]
            n_r = 64
            n_z = 96
            r_max = 1.0
            z_max = 0.75
            [physics]
            w = 0.025
            lambdas = [400.0, 100.0, 200.0, 800.0, 200.0]
            [solver]
            init = "random"
            seed = 7
            symmetrize = false
        "#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.sweep_lambdas().unwrap(), vec![100.0, 200.0, 400.0, 800.0]);
        let p = cfg.params(100.0).unwrap();
        assert_eq!(p.window, TruncationBox::new(1.0, 0.75));
        assert_eq!(p.init, InitStrategy::Random { seed: 7 });
        assert!(!p.symmetrize);
        assert_eq!(p.background, BackgroundMode::ScaledUniform);
    }

    #[test]
    fn solve_needs_a_lambda() {
        let cfg = RunConfig::parse("[domain]\nkind = \"disk\"\nb = 1.0\n").unwrap();
        assert!(cfg.solve_lambda().is_err());
    }
}
