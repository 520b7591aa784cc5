//! Energy ascent over the rearrangement class by repeated level-set selection.
//!
//! Each step replaces the vorticity by `λ` times the indicator of the
//! super-level set of `Φ = Kζ - B` of ν-mass `1/λ`, where `B` is the background
//! potential. Because the bilinear form `⟨ζ, Kζ⟩` is positive definite, every
//! step does not decrease the energy `½⟨ζ, Kζ⟩ - ⟨ζ, B⟩`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, energy, DiagnosticsRecord, RunParams};
use crate::domain::{Grid, MeridionalDomain};
use crate::error::{Result, RingError};
use crate::field::StreamField;
use crate::solver::EllipticSolver;

/// How the far-field translation enters the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// `(W log λ / 2) r²`
    ScaledUniform,
    /// `(W / 2) r²`
    FixedUniform,
    /// no background (bounded domains)
    None,
    /// `(W log λ / 2)(r² - r² d³ / (r² + z²)^{3/2})`, the uniform stream past a ball
    ExteriorBallScaled,
}

impl BackgroundMode {
    pub fn name(self) -> &'static str {
        match self {
            BackgroundMode::ScaledUniform => "scaled_uniform",
            BackgroundMode::FixedUniform => "fixed_uniform",
            BackgroundMode::None => "none",
            BackgroundMode::ExteriorBallScaled => "exterior_ball_scaled",
        }
    }

    /// The natural mode for a domain kind.
    pub fn default_for(domain: &MeridionalDomain) -> Self {
        match domain {
            MeridionalDomain::Pipe { .. } | MeridionalDomain::HalfPlane => BackgroundMode::ScaledUniform,
            MeridionalDomain::ExteriorBall { .. } => BackgroundMode::ExteriorBallScaled,
            MeridionalDomain::Disk { .. } | MeridionalDomain::Rectangle { .. } => BackgroundMode::None,
        }
    }
}

/// Background stream of speed parameter `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundFlow {
    pub mode: BackgroundMode,
    pub w: f64,
}

impl BackgroundFlow {
    pub fn new(mode: BackgroundMode, w: f64) -> Result<Self> {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(RingError::InvalidParameter(format!("W must be finite and non-negative, got {w}")));
        }
        Ok(Self { mode, w })
    }

    pub fn none() -> Self {
        Self {
            mode: BackgroundMode::None,
            w: 0.0,
        }
    }

    /// A scaled mode with `W = 0` carries no background and is treated as `None`.
    pub fn effective(self) -> Self {
        match self.mode {
            BackgroundMode::ScaledUniform | BackgroundMode::ExteriorBallScaled if self.w == 0.0 => Self::none(),
            _ => self,
        }
    }

    /// Coefficient `c` of `c r²` in the far field.
    pub fn coefficient(&self, lambda: f64) -> f64 {
        match self.mode {
            BackgroundMode::ScaledUniform | BackgroundMode::ExteriorBallScaled => 0.5 * self.w * lambda.ln(),
            BackgroundMode::FixedUniform => 0.5 * self.w,
            BackgroundMode::None => 0.0,
        }
    }

    /// Far-field axial velocity `-2c`.
    pub fn far_field_velocity(&self, lambda: f64) -> f64 {
        -2.0 * self.coefficient(lambda)
    }

    /// Background potential at `(r, z)`.
    pub fn potential(&self, r: f64, z: f64, lambda: f64, domain: &MeridionalDomain) -> f64 {
        let c = self.coefficient(lambda);
        match (self.mode, domain) {
            (BackgroundMode::None, _) => 0.0,
            (BackgroundMode::ExteriorBallScaled, MeridionalDomain::ExteriorBall { d }) => {
                let rho2 = r * r + z * z;
                c * r * r * (1.0 - d.powi(3) / (rho2 * rho2.sqrt()))
            }
            _ => c * r * r,
        }
    }

    /// The potential sampled at every cell (zero outside the domain).
    pub fn field(&self, grid: &Grid, lambda: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|k| {
                if grid.is_active(k) {
                    let (r, z) = grid.center(k);
                    self.potential(r, z, lambda, &grid.domain)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn check_domain(&self, domain: &MeridionalDomain) -> Result<()> {
        if self.mode == BackgroundMode::ExteriorBallScaled && !matches!(domain, MeridionalDomain::ExteriorBall { .. }) {
            return Err(RingError::InvalidParameter(format!(
                "background {} needs an exterior-ball domain",
                self.mode.name()
            )));
        }
        Ok(())
    }
}

/// Step vorticity `ζ = λ w` with cell weights `w ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVorticity {
    pub lambda: f64,
    pub weights: Vec<f64>,
}

impl PotentialVorticity {
    pub fn zeros(grid: &Grid, lambda: f64) -> Self {
        Self {
            lambda,
            weights: vec![0.0; grid.len()],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.weights.iter().map(|w| self.lambda * w).collect()
    }

    /// `∫ζ dν`.
    pub fn mass(&self, grid: &Grid) -> f64 {
        self.lambda * crate::domain::nu_measure(grid, &self.weights)
    }
}

/// Cells allowed to carry vorticity: `0 < r < r_max`, `|z| < z_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub r_max: f64,
    pub z_max: f64,
}

impl SupportBox {
    /// `{0 < r < r* + 1, |z| < 2 r*}`.
    pub fn around(r_star: f64) -> Self {
        Self {
            r_max: r_star + 1.0,
            z_max: 2.0 * r_star,
        }
    }

    pub fn contains(&self, r: f64, z: f64) -> bool {
        r < self.r_max && z.abs() < self.z_max
    }
}

/// One iterate of the ascent.
#[derive(Debug, Clone)]
pub struct FixedPointState {
    pub zeta: PotentialVorticity,
    /// `Kζ`
    pub psi_induced: StreamField,
    /// threshold at which `zeta` was selected
    pub mu: f64,
    pub energy_history: Vec<f64>,
    pub support_box: Option<SupportBox>,
}

impl FixedPointState {
    pub fn energy(&self) -> f64 {
        *self.energy_history.last().unwrap_or(&0.0)
    }
}

/// `Φ = Kζ - B`; cells outside the domain or the support box are `-∞`.
pub fn augmented_potential(state: &FixedPointState, background: &BackgroundFlow, grid: &Grid) -> Vec<f64> {
    let lambda = state.zeta.lambda;
    (0..grid.len())
        .map(|k| {
            let (r, z) = grid.center(k);
            let allowed = grid.is_active(k) && state.support_box.map_or(true, |b| b.contains(r, z));
            if allowed {
                state.psi_induced[k] - background.potential(r, z, lambda, &grid.domain)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Largest threshold `μ` whose closed super-level set of `phi` has ν-mass at
/// least `1/λ`, found by weighted quickselect.
fn select_threshold(phi: &[f64], nu: &[f64], candidates: Vec<usize>, target: f64) -> f64 {
    let mut cand = candidates;
    let mut need = target;
    let mut above = Vec::new();
    let mut below = Vec::new();
    // the pivot only affects speed; a fixed xorshift sequence avoids structured worst cases
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    loop {
        let n = cand.len();
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let pivot = phi[cand[(state % n as u64) as usize]];
        above.clear();
        below.clear();
        let (mut m_above, mut m_tie) = (0.0, 0.0);
        for &k in &cand {
            let v = phi[k];
            if v > pivot {
                above.push(k);
                m_above += nu[k];
            } else if v == pivot {
                m_tie += nu[k];
            } else {
                below.push(k);
            }
        }
        if m_above >= need && !above.is_empty() {
            std::mem::swap(&mut cand, &mut above);
        } else if m_above + m_tie >= need || below.is_empty() {
            return pivot;
        } else {
            need -= m_above + m_tie;
            std::mem::swap(&mut cand, &mut below);
        }
    }
}

/// Selects the cells of largest `phi` with total ν-mass exactly `1/λ`.
///
/// Cells strictly above the threshold get weight 1; cells equal to it share the
/// remaining mass proportionally. Masses are accumulated in cell order so the
/// result does not depend on the selection order.
pub fn quantile_select(phi: &[f64], grid: &Grid, lambda: f64) -> Result<(Vec<f64>, f64)> {
    assert_eq!(phi.len(), grid.len(), "phi must cover the grid");
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(RingError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let target = 1.0 / lambda;
    let nu = grid.nu_weights();
    let feasible: Vec<usize> = (0..grid.len())
        .filter(|&k| grid.is_active(k) && phi[k] > f64::NEG_INFINITY)
        .collect();
    let available: f64 = feasible.iter().map(|&k| nu[k]).sum();
    if feasible.is_empty() || target > available {
        return Err(RingError::Infeasible {
            requested: target,
            available,
        });
    }
    let mu = select_threshold(phi, nu, feasible.clone(), target);
    let (mut above, mut tie) = (0.0, 0.0);
    for &k in &feasible {
        if phi[k] > mu {
            above += nu[k];
        } else if phi[k] == mu {
            tie += nu[k];
        }
    }
    let frac = ((target - above) / tie).clamp(0.0, 1.0);
    let mut weights = vec![0.0; grid.len()];
    for &k in &feasible {
        if phi[k] > mu {
            weights[k] = 1.0;
        } else if phi[k] == mu {
            weights[k] = frac;
        }
    }
    Ok((weights, mu))
}

/// Column-wise symmetric decreasing rearrangement about `z = 0`.
///
/// The values of each `r`-column are sorted in decreasing order and dealt out
/// alternately from the midplane outwards, upper cell first. This is a
/// permutation of each column, so column sums are preserved exactly, and the
/// discrete Dirichlet energy cannot decrease. Columns that are already
/// symmetric and decreasing are returned unchanged; an asymmetric column comes
/// back symmetric up to the one-cell offset of the dealing order. Excluded
/// cells keep their value.
pub fn steiner_symmetrize(zeta: &[f64], grid: &Grid) -> Vec<f64> {
    let nz = grid.n_z;
    let half = nz / 2;
    let mut out = zeta.to_vec();
    let mut col = Vec::with_capacity(nz);
    for i in 0..grid.n_r {
        // only the symmetric run of active cells around the midplane participates
        let mut reach = 0;
        while reach < half && grid.is_active(grid.idx(i, half + reach)) && grid.is_active(grid.idx(i, half - 1 - reach)) {
            reach += 1;
        }
        if reach == 0 {
            continue;
        }
        col.clear();
        for p in 0..reach {
            col.push(zeta[grid.idx(i, half + p)]);
            col.push(zeta[grid.idx(i, half - 1 - p)]);
        }
        col.sort_by(|a, b| b.total_cmp(a));
        for p in 0..reach {
            out[grid.idx(i, half + p)] = col[2 * p];
            out[grid.idx(i, half - 1 - p)] = col[2 * p + 1];
        }
    }
    out
}

/// How the ascent is started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Round core of mass `1/λ` centred at `(r, 0)`; `r = None` uses r* (or mid-domain).
    Annulus { r: Option<f64> },
    /// Uniformly random cells of total mass `1/λ`.
    Random { seed: u64 },
    /// Round cores at several radii; the one of largest energy is kept.
    Scan,
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::Scan
    }
}

/// Reusable ascent context for one grid, background and strength.
pub struct Ascent {
    solver: EllipticSolver,
    background: BackgroundFlow,
    lambda: f64,
    pub symmetrize: bool,
    pub support_box: Option<SupportBox>,
}

impl Ascent {
    pub fn new(grid: &Grid, background: BackgroundFlow, lambda: f64) -> Result<Self> {
        background.check_domain(&grid.domain)?;
        Ok(Self {
            solver: EllipticSolver::new(grid),
            background: background.effective(),
            lambda,
            symmetrize: true,
            support_box: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.solver.grid()
    }

    pub fn background(&self) -> &BackgroundFlow {
        &self.background
    }

    pub fn solver(&self) -> &EllipticSolver {
        &self.solver
    }

    pub fn with_solver_tolerance(mut self, tol: f64) -> Self {
        self.solver.tolerance = tol;
        self
    }

    /// Builds the state of a given weight field (no selection is applied).
    pub fn state_from_weights(&self, weights: Vec<f64>, mu: f64, guess: Option<&StreamField>) -> Result<FixedPointState> {
        let zeta = PotentialVorticity {
            lambda: self.lambda,
            weights,
        };
        let (psi, _) = self.solver.solve_with_guess(&zeta.values(), guess)?;
        let e = energy(&zeta, &psi, &self.background, self.grid());
        Ok(FixedPointState {
            zeta,
            psi_induced: psi,
            mu,
            energy_history: vec![e],
            support_box: self.support_box,
        })
    }

    /// Potential used for the next selection, mirror-averaged when symmetrizing.
    fn selection_potential(&self, state: &FixedPointState) -> Vec<f64> {
        let grid = self.grid();
        let phi = augmented_potential(state, &self.background, grid);
        if !self.symmetrize {
            return phi;
        }
        (0..grid.len())
            .map(|k| {
                let (a, b) = (phi[k], phi[grid.mirror(k)]);
                if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    0.5 * (a + b)
                }
            })
            .collect()
    }

    /// Weights selected from a state's potential, and the threshold.
    pub fn select(&self, state: &FixedPointState) -> Result<(Vec<f64>, f64)> {
        let phi = self.selection_potential(state);
        let (w, mu) = quantile_select(&phi, self.grid(), self.lambda)?;
        let w = if self.symmetrize { steiner_symmetrize(&w, self.grid()) } else { w };
        Ok((w, mu))
    }

    /// One selection followed by one solve; the energy history is extended.
    pub fn iterate_once(&self, state: &FixedPointState) -> Result<FixedPointState> {
        let (w, mu) = self.select(state)?;
        let mut next = self.state_from_weights(w, mu, Some(&state.psi_induced))?;
        let mut history = state.energy_history.clone();
        history.push(next.energy());
        next.energy_history = history;
        Ok(next)
    }

    /// Round core of mass `1/λ` about `(r0, 0)`.
    pub fn round_core(&self, r0: f64) -> Result<FixedPointState> {
        let grid = self.grid();
        let phi: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (r, z) = grid.center(k);
                let ok = grid.is_active(k) && self.support_box.map_or(true, |b| b.contains(r, z));
                if ok {
                    -((r - r0).powi(2) + z * z)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let (w, mu) = quantile_select(&phi, grid, self.lambda)?;
        self.state_from_weights(w, mu, None)
    }

    /// Uniformly random cells of mass `1/λ` from a seeded generator.
    pub fn random_core(&self, seed: u64) -> Result<FixedPointState> {
        let grid = self.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi: Vec<f64> = (0..grid.len())
            .map(|k| {
                let v: f64 = rng.gen();
                let (r, z) = grid.center(k);
                let ok = grid.is_active(k) && self.support_box.map_or(true, |b| b.contains(r, z));
                if ok {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let (w, mu) = quantile_select(&phi, grid, self.lambda)?;
        let w = if self.symmetrize { steiner_symmetrize(&w, grid) } else { w };
        self.state_from_weights(w, mu, None)
    }

    /// Round cores at `r_guess` and at a range of radii across the window; the
    /// best radius is then refined by golden-section search on the energy of the
    /// round core, down to one cell.
    pub fn scan_start(&self, r_guess: Option<f64>) -> Result<FixedPointState> {
        let grid = self.grid();
        let r_hi = self.support_box.map_or(grid.window.r_max, |b| b.r_max.min(grid.window.r_max));
        let step = r_hi / 16.0;
        let mut radii: Vec<f64> = (1..16).map(|n| step * n as f64).collect();
        radii.extend(r_guess);
        let mut best: Option<(f64, FixedPointState)> = None;
        let consider = |r0: f64, best: &mut Option<(f64, FixedPointState)>| -> Result<Option<f64>> {
            match self.round_core(r0) {
                Ok(state) => {
                    let e = state.energy();
                    if best.as_ref().map_or(true, |(_, b)| e > b.energy()) {
                        *best = Some((r0, state));
                    }
                    Ok(Some(e))
                }
                Err(RingError::Infeasible { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        for r0 in radii {
            consider(r0, &mut best)?;
        }
        let Some((r_best, _)) = best else {
            return Err(RingError::Infeasible {
                requested: 1.0 / self.lambda,
                available: grid.active_volume(),
            });
        };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = ((r_best - step).max(0.5 * grid.h_r), (r_best + step).min(r_hi));
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = consider(x1, &mut best)?.unwrap_or(f64::NEG_INFINITY);
        let mut f2 = consider(x2, &mut best)?.unwrap_or(f64::NEG_INFINITY);
        while hi - lo > grid.h_r {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = consider(x2, &mut best)?.unwrap_or(f64::NEG_INFINITY);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = consider(x1, &mut best)?.unwrap_or(f64::NEG_INFINITY);
            }
        }
        Ok(best.expect("at least one feasible start").1)
    }
}

/// Stopping rule of the ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// relative energy change
    pub tol_e: f64,
    /// ν-mass of the symmetric difference of successive supports
    pub tol_supp: f64,
    pub max_iters: usize,
    /// relative residual of each elliptic solve
    pub solver: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_e: 1e-9,
            tol_supp: 1e-6,
            max_iters: 200,
            solver: 1e-9,
        }
    }
}

/// Convergence summary of an ascent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub converged: bool,
    pub support_changes: Vec<f64>,
}

/// Iterates [`Ascent::iterate_once`] from `start` until both stopping criteria hold.
pub fn run_ascent(ascent: &Ascent, start: FixedPointState, tol: &Tolerances) -> Result<(FixedPointState, Convergence)> {
    let grid = ascent.grid();
    let mut state = start;
    let mut changes = Vec::new();
    for it in 1..=tol.max_iters {
        let next = ascent.iterate_once(&state)?;
        let diff: f64 = (0..grid.len())
            .map(|k| (next.zeta.weights[k] - state.zeta.weights[k]).abs() * grid.nu(k))
            .sum();
        let (e0, e1) = (state.energy(), next.energy());
        let rel = (e1 - e0).abs() / e1.abs().max(f64::MIN_POSITIVE);
        changes.push(diff);
        state = next;
        if diff < tol.tol_supp && rel < tol.tol_e {
            return Ok((
                state,
                Convergence {
                    iterations: it,
                    converged: true,
                    support_changes: changes,
                },
            ));
        }
    }
    let n = changes.len();
    Err(RingError::NonConvergence {
        iterations: tol.max_iters,
        last_diffs: [
            if n >= 2 { changes[n - 2] } else { f64::NAN },
            changes.last().copied().unwrap_or(f64::NAN),
        ],
    })
}

/// Full run: grid, start, ascent to a fixed point, diagnostics.
pub fn solve_fixed_point(params: &RunParams) -> Result<(FixedPointState, DiagnosticsRecord)> {
    params.validate()?;
    let grid = params.grid()?;
    let background = params.background_flow()?;
    let r_star = diagnostics::r_star(&params.domain, params.w).ok();
    let mut ascent = Ascent::new(&grid, background, params.lambda)?.with_solver_tolerance(params.tolerances.solver);
    ascent.symmetrize = params.symmetrize;
    ascent.support_box = params.effective_support_box();
    let start = match params.init {
        InitStrategy::Annulus { r } => {
            let r0 = r.or(r_star).unwrap_or(0.5 * grid.window.r_max);
            ascent.round_core(r0)?
        }
        InitStrategy::Random { seed } => ascent.random_core(seed)?,
        InitStrategy::Scan => ascent.scan_start(r_star)?,
    };
    let (state, conv) = run_ascent(&ascent, start, &params.tolerances)?;
    let record = diagnostics::measure(&state, &ascent, params, &conv)?;
    Ok((state, record))
}

/// Predicted core diameter `2 (2π² r λ)^{-1/2}` of a round core of mass `1/λ` at radius `r`.
pub fn predicted_diameter(r: f64, lambda: f64) -> f64 {
    2.0 / (2.0 * PI * PI * r * lambda).sqrt()
}
