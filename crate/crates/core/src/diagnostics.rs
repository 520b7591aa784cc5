//! Measured quantities of a converged ring and the predicted asymptotic values.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{active_points, dist_to_circle, set_geometry, Grid, MeridionalDomain, TruncationBox};
use crate::error::{Result, RingError};
use crate::field::StreamField;
use crate::flow::{velocity_from_stream, weak_steadiness_residual};
use crate::rearrangement::{
    predicted_diameter, Ascent, BackgroundFlow, BackgroundMode, Convergence, FixedPointState, InitStrategy,
    PotentialVorticity, SupportBox, Tolerances,
};
use crate::solver::EllipticSolver;

/// Minimum core diameter, in cells, for a run to enter the scaling fits.
pub const GATE_CELLS: f64 = 6.0;

/// Everything needed to reproduce one fixed-point run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub domain: MeridionalDomain,
    pub window: TruncationBox,
    pub n_r: usize,
    pub n_z: usize,
    pub lambda: f64,
    pub w: f64,
    pub background: BackgroundMode,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub init: InitStrategy,
    #[serde(default = "default_true")]
    pub symmetrize: bool,
    #[serde(default)]
    pub support_box: Option<SupportBox>,
}

fn default_true() -> bool {
    true
}

impl RunParams {
    /// Parameters with the natural background of `domain` and default window.
    pub fn new(domain: MeridionalDomain, lambda: f64, w: f64, n_r: usize, n_z: usize) -> Result<Self> {
        let window = match TruncationBox::bounding(&domain) {
            Some(b) => b,
            None => {
                let rs = r_star(&domain, w)?;
                TruncationBox::for_core(&domain, rs, 3.0)
            }
        };
        Ok(Self {
            domain,
            window,
            n_r,
            n_z,
            lambda,
            w,
            background: BackgroundMode::default_for(&domain),
            tolerances: Tolerances::default(),
            init: InitStrategy::default(),
            symmetrize: true,
            support_box: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(RingError::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.w.is_finite() && self.w >= 0.0) {
            return Err(RingError::InvalidParameter(format!("W must be non-negative, got {}", self.w)));
        }
        if let Some(vol) = self.domain.volume() {
            if self.lambda * vol <= 1.0 {
                return Err(RingError::Infeasible {
                    requested: 1.0 / self.lambda,
                    available: vol,
                });
            }
        }
        self.background_flow()?.check_domain(&self.domain)?;
        let rs = r_star(&self.domain, self.w).unwrap_or(0.0);
        self.window.check_core(&self.domain, rs)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::build(self.domain, self.window, self.n_r, self.n_z)
    }

    pub fn background_flow(&self) -> Result<BackgroundFlow> {
        BackgroundFlow::new(self.background, self.w).map(BackgroundFlow::effective)
    }

    /// The configured support box, or the default box around r* for the exterior ball.
    pub fn effective_support_box(&self) -> Option<SupportBox> {
        self.support_box.or_else(|| match self.domain {
            MeridionalDomain::ExteriorBall { .. } => r_star(&self.domain, self.w).ok().map(SupportBox::around),
            _ => None,
        })
    }

    /// Diameter of a round core of mass `1/λ` at r* (or mid-window).
    pub fn predicted_diameter(&self) -> f64 {
        let r = r_star(&self.domain, self.w).unwrap_or(0.5 * self.window.r_max);
        predicted_diameter(r, self.lambda)
    }

    pub fn cell_size(&self) -> f64 {
        (self.window.r_max / self.n_r as f64).max(2.0 * self.window.z_max / self.n_z as f64)
    }

    /// Resolution gate on the predicted core: at least [`GATE_CELLS`] cells across.
    pub fn check_resolution(&self) -> Result<()> {
        let d = self.predicted_diameter();
        let cells = d / self.cell_size();
        if cells < GATE_CELLS {
            return Err(RingError::UnderResolved(format!(
                "predicted core diameter {d:.4e} spans {cells:.2} cells, need {GATE_CELLS}"
            )));
        }
        Ok(())
    }
}

/// Measurements of one converged run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub domain: String,
    pub background: String,
    pub lambda: f64,
    pub log_lambda: f64,
    pub w: f64,
    pub n_r: usize,
    pub n_z: usize,
    pub h: f64,
    pub e_lambda: f64,
    pub j_core: f64,
    pub mu: f64,
    pub impulse: f64,
    /// `⟨ζ, B⟩`
    pub background_pairing: f64,
    pub circulation_kappa: f64,
    pub diameter: f64,
    pub centroid_r: f64,
    pub centroid_z: f64,
    pub r_star: Option<f64>,
    pub dist_to_rstar: Option<f64>,
    pub far_field_vz: Option<f64>,
    pub far_field_expected: Option<f64>,
    pub green_bifurcation_l1: f64,
    pub weak_residual: f64,
    pub identity_residual: f64,
    pub min_psi_induced: f64,
    pub iterations: usize,
    pub converged: bool,
    /// diameter spans at least [`GATE_CELLS`] cells
    pub resolved: bool,
}

/// `½ Σ ζ Kζ ν - Σ ζ B ν`.
pub fn energy(zeta: &PotentialVorticity, psi_induced: &StreamField, background: &BackgroundFlow, grid: &Grid) -> f64 {
    let values = zeta.values();
    let quad: f64 = values
        .iter()
        .enumerate()
        .filter(|&(k, &z)| z != 0.0 && grid.is_active(k))
        .map(|(k, &z)| z * psi_induced[k] * grid.nu(k))
        .sum();
    0.5 * quad - background_pairing(&values, background, zeta.lambda, grid)
}

/// `⟨ζ, B⟩` for a background at strength `lambda`.
pub fn background_pairing(zeta: &[f64], background: &BackgroundFlow, lambda: f64, grid: &Grid) -> f64 {
    zeta.iter()
        .enumerate()
        .filter(|&(k, &z)| z != 0.0 && grid.is_active(k))
        .map(|(k, &z)| {
            let (r, zz) = grid.center(k);
            z * background.potential(r, zz, lambda, &grid.domain) * grid.nu(k)
        })
        .sum()
}

/// `𝓘 = ½ Σ r² ζ ν`.
pub fn impulse(zeta: &[f64], grid: &Grid) -> f64 {
    0.5 * zeta
        .iter()
        .enumerate()
        .filter(|&(k, _)| grid.is_active(k))
        .map(|(k, &z)| grid.center(k).0.powi(2) * z * grid.nu(k))
        .sum::<f64>()
}

/// `J = ½ Σ ψ⁺ ζ ν` for the shifted stream function `ψ = Kζ - B - μ`.
pub fn core_energy_j(psi_lambda: &StreamField, zeta: &[f64], grid: &Grid) -> f64 {
    0.5 * zeta
        .iter()
        .enumerate()
        .filter(|&(k, _)| grid.is_active(k))
        .map(|(k, &z)| psi_lambda[k].max(0.0) * z * grid.nu(k))
        .sum::<f64>()
}

/// Relative residual of `2E = 2J + μ - ⟨ζ, B⟩`.
///
/// For the scaled uniform stream `⟨ζ, B⟩ = W log λ 𝓘`; the exterior-ball stream
/// subtracts the pairing with the image term.
pub fn multiplier_identity_check(record: &DiagnosticsRecord) -> f64 {
    let lhs = 2.0 * record.e_lambda;
    let rhs = 2.0 * record.j_core + record.mu - record.background_pairing;
    let diff = (lhs - rhs).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / record.mu.abs()
    }
}

/// Radius of the limiting vortex filament.
pub fn r_star(domain: &MeridionalDomain, w: f64) -> Result<f64> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(RingError::InvalidParameter(format!("W must be non-negative, got {w}")));
    }
    let free = 1.0 / (16.0 * PI * PI * w);
    match *domain {
        MeridionalDomain::HalfPlane => {
            if w == 0.0 {
                Err(RingError::UndefinedRStar("no translation speed in the whole space".into()))
            } else {
                Ok(free)
            }
        }
        MeridionalDomain::Pipe { d } => Ok(if w == 0.0 { d } else { free.min(d) }),
        MeridionalDomain::ExteriorBall { d } => {
            if w == 0.0 {
                return Err(RingError::UndefinedRStar("no translation speed past the ball".into()));
            }
            if w >= 1.0 / (24.0 * PI * PI * d) {
                return Ok(d);
            }
            let gamma = |t: f64| t - 8.0 * PI * PI * w * t * t + 8.0 * PI * PI * w * d.powi(3) / t;
            Ok(golden_max(gamma, d, 100.0 * d, 1e-10))
        }
        MeridionalDomain::Disk { b } | MeridionalDomain::Rectangle { b, .. } => Ok(b),
    }
}

/// Golden-section maximiser of a unimodal function on `[a, b]`, with the endpoints
/// compared at the end.
fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol * lo.abs().max(1.0) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [a, mid, b].into_iter().fold(mid, |best, x| if f(x) > f(best) { x } else { best })
}

/// Kelvin-Hicks speed of the measured core divided by the imposed speed `W log λ`.
pub fn kelvin_hicks_check(record: &DiagnosticsRecord) -> Result<f64> {
    if !(record.diameter > 0.0) {
        return Err(RingError::UnderResolved("core diameter is zero".into()));
    }
    let speed = record.w * record.log_lambda;
    if !(speed > 0.0) {
        return Err(RingError::InvalidParameter("the imposed speed W log lambda must be positive".into()));
    }
    let (rc, eps) = (record.centroid_r, 0.5 * record.diameter);
    let kappa = record.circulation_kappa;
    Ok(kappa / (4.0 * PI * rc) * ((8.0 * rc / eps).ln() - 0.25) / speed)
}

/// `Σ |Kζ - K(·, a)| ν` outside a ball of five cells about the centroid `a`,
/// with `K(·, a)` the response to a unit mass placed at `a`.
pub fn green_bifurcation_distance(psi_induced: &StreamField, zeta: &[f64], grid: &Grid) -> Result<f64> {
    let (_, center) = set_geometry(zeta, grid)?;
    green_bifurcation_distance_at(psi_induced, grid, center)
}

/// Unit mass at `(r, z)` split bilinearly over the four surrounding cells, so
/// that its first moments are exactly `(r, z)`. Falls back to the nearest cell
/// when a neighbour is masked or outside the window.
pub fn point_mass(grid: &Grid, (r, z): (f64, f64)) -> Vec<f64> {
    let mut zeta = vec![0.0; grid.len()];
    let fi = (r - grid.r(0)) / grid.h_r;
    let fj = (z - grid.z(0)) / grid.h_z;
    let (i0, j0) = (fi.floor(), fj.floor());
    let inside = i0 >= 0.0 && j0 >= 0.0 && (i0 as usize) + 1 < grid.n_r && (j0 as usize) + 1 < grid.n_z;
    if inside {
        let (i0, j0, tr, tz) = (i0 as usize, j0 as usize, fi - fi.floor(), fj - fj.floor());
        let corners = [
            (i0, j0, (1.0 - tr) * (1.0 - tz)),
            (i0 + 1, j0, tr * (1.0 - tz)),
            (i0, j0 + 1, (1.0 - tr) * tz),
            (i0 + 1, j0 + 1, tr * tz),
        ];
        if corners.iter().all(|&(i, j, _)| grid.is_active(grid.idx(i, j))) {
            for (i, j, m) in corners {
                let k = grid.idx(i, j);
                zeta[k] += m / grid.nu(k);
            }
            return zeta;
        }
    }
    let k = grid.locate(r, z);
    zeta[k] = 1.0 / grid.nu(k);
    zeta
}

/// As [`green_bifurcation_distance`] with the point mass at `center`.
pub fn green_bifurcation_distance_at(psi_induced: &StreamField, grid: &Grid, center: (f64, f64)) -> Result<f64> {
    let (k_point, _) = EllipticSolver::new(grid).solve(&point_mass(grid, center))?;
    let (rc, zc) = center;
    let exclude = 5.0 * grid.h_max();
    Ok((0..grid.len())
        .filter(|&k| {
            let (r, z) = grid.center(k);
            grid.is_active(k) && (r - rc).hypot(z - zc) > exclude
        })
        .map(|k| (psi_induced[k] - k_point[k]).abs() * grid.nu(k))
        .sum())
}

/// Mean axial velocity of `ψ_total` on the two axial window rows at half the
/// window radius.
pub fn far_field_vz(psi_total: &StreamField, grid: &Grid) -> f64 {
    let vel = velocity_from_stream(psi_total, grid);
    let i = grid.locate(0.5 * grid.window.r_max, 0.0) / grid.n_z;
    0.5 * (vel[grid.idx(i, 0)].v_z + vel[grid.idx(i, grid.n_z - 1)].v_z)
}

/// `ψ_total = Kζ - B`.
pub fn total_stream(psi_induced: &StreamField, background: &BackgroundFlow, lambda: f64, grid: &Grid) -> StreamField {
    let b = background.field(grid, lambda);
    let v = psi_induced.values().iter().zip(&b).map(|(p, b)| p - b).collect();
    StreamField::from_values(grid, v)
}

/// `ψ_λ = Kζ - B - μ` (zero outside the domain).
pub fn shifted_stream(state: &FixedPointState, background: &BackgroundFlow, grid: &Grid) -> StreamField {
    let total = total_stream(&state.psi_induced, background, state.zeta.lambda, grid);
    let v = total
        .values()
        .iter()
        .enumerate()
        .map(|(k, &p)| if grid.is_active(k) { p - state.mu } else { 0.0 })
        .collect();
    StreamField::from_values(grid, v)
}

/// All diagnostics of a converged state.
pub fn measure(state: &FixedPointState, ascent: &Ascent, params: &RunParams, conv: &Convergence) -> Result<DiagnosticsRecord> {
    let grid = ascent.grid();
    let background = ascent.background();
    let lambda = state.zeta.lambda;
    let zeta = state.zeta.values();
    let psi_lambda = shifted_stream(state, background, grid);
    let total = total_stream(&state.psi_induced, background, lambda, grid);
    let (diameter, (centroid_r, centroid_z)) = set_geometry(&state.zeta.weights, grid)?;
    let rs = r_star(&params.domain, params.w).ok();
    let dist = match rs {
        Some(r) => Some(dist_to_circle(&active_points(grid, &state.zeta.weights), r)?),
        None => None,
    };
    let far = (background.mode != BackgroundMode::None).then(|| far_field_vz(&total, grid));
    let mut rec = DiagnosticsRecord {
        domain: params.domain.kind().name().to_string(),
        background: background.mode.name().to_string(),
        lambda,
        log_lambda: lambda.ln(),
        w: params.w,
        n_r: grid.n_r,
        n_z: grid.n_z,
        h: grid.h_max(),
        e_lambda: state.energy(),
        j_core: core_energy_j(&psi_lambda, &zeta, grid),
        mu: state.mu,
        impulse: impulse(&zeta, grid),
        background_pairing: background_pairing(&zeta, background, lambda, grid),
        circulation_kappa: state.zeta.mass(grid) / (2.0 * PI),
        diameter,
        centroid_r,
        centroid_z,
        r_star: rs,
        dist_to_rstar: dist,
        far_field_vz: far,
        far_field_expected: far.map(|_| background.far_field_velocity(lambda)),
        green_bifurcation_l1: green_bifurcation_distance(&state.psi_induced, &zeta, grid)?,
        weak_residual: weak_steadiness_residual(&total, &zeta, grid),
        identity_residual: 0.0,
        min_psi_induced: state.psi_induced.values().iter().copied().fold(f64::INFINITY, f64::min),
        iterations: conv.iterations,
        converged: conv.converged,
        resolved: diameter >= GATE_CELLS * grid.h_max(),
    };
    rec.identity_residual = multiplier_identity_check(&rec);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::ring_green_unchecked;

    fn half_plane(n: usize) -> Grid {
        Grid::build(MeridionalDomain::HalfPlane, TruncationBox::new(3.0, 3.0), n, 2 * n).unwrap()
    }

    #[test]
    fn r_star_examples() {
        let hp = r_star(&MeridionalDomain::HalfPlane, 1.0 / (32.0 * PI * PI)).unwrap();
        assert!((hp - 2.0).abs() < 1e-12);
        let pipe = r_star(&MeridionalDomain::Pipe { d: 1.0 }, 1.0 / (64.0 * PI * PI)).unwrap();
        assert_eq!(pipe, 1.0);
        let eb = r_star(&MeridionalDomain::ExteriorBall { d: 1.0 }, 1.0 / (16.0 * PI * PI)).unwrap();
        assert_eq!(eb, 1.0);
        assert!(r_star(&MeridionalDomain::HalfPlane, 0.0).is_err());
        assert_eq!(r_star(&MeridionalDomain::Disk { b: 0.7 }, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn exterior_ball_r_star_maximises_profile() {
        let (d, w) = (1.0, 1.0 / (40.0 * PI * PI));
        let t = r_star(&MeridionalDomain::ExteriorBall { d }, w).unwrap();
        assert!(t > d);
        // stationary point of t - 8π²W t² + 8π²W d³/t
        let slope = 1.0 - 16.0 * PI * PI * w * t - 8.0 * PI * PI * w * d.powi(3) / (t * t);
        // golden section on function values resolves a flat maximum to about sqrt(eps)
        assert!(slope.abs() < 1e-6, "{slope}");
    }

    #[test]
    fn energy_and_impulse_trivial() {
        let g = half_plane(16);
        let zeros = vec![0.0; g.len()];
        let b = BackgroundFlow::new(BackgroundMode::ScaledUniform, 0.3).unwrap();
        let pv = PotentialVorticity::zeros(&g, 50.0);
        assert_eq!(energy(&pv, &StreamField::zeros(&g), &b, &g), 0.0);
        assert_eq!(impulse(&zeros, &g), 0.0);
        let mut zeta = zeros.clone();
        let k = g.locate(1.2, 0.4);
        zeta[k] = 1.0 / g.nu(k);
        let r0 = g.center(k).0;
        assert!((impulse(&zeta, &g) - 0.5 * r0 * r0).abs() < 1e-14);
    }

    #[test]
    fn energy_background_term_is_impulse() {
        let g = half_plane(16);
        let lambda = 40.0;
        let pv = PotentialVorticity {
            lambda,
            weights: (0..g.len()).map(|k| if k % 7 == 0 { 1.0 } else { 0.0 }).collect(),
        };
        let zeta = pv.values();
        let w = 0.05;
        let b = BackgroundFlow::new(BackgroundMode::ScaledUniform, w).unwrap();
        let e = energy(&pv, &StreamField::zeros(&g), &b, &g);
        let expect = -(w * lambda.ln() / 2.0) * 2.0 * impulse(&zeta, &g);
        assert!((e - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn two_cell_energy_matches_direct_sum() {
        let g = half_plane(64);
        let (a, b) = (g.locate(1.0, 0.0), g.locate(1.6, 0.9));
        let mut pv = PotentialVorticity::zeros(&g, 1.0);
        pv.weights[a] = 2.0;
        pv.weights[b] = 3.0;
        let psi = crate::greens::quadrature_apply_k(&pv.values(), &g).unwrap();
        let e = energy(&pv, &psi, &BackgroundFlow::none(), &g);
        let (ra, za) = g.center(a);
        let (rb, zb) = g.center(b);
        let cross = ring_green_unchecked(ra, za, rb, zb) * 2.0 * 3.0 * g.nu(a) * g.nu(b);
        let selfs = 0.5
            * (2.0 * 2.0 * g.nu(a) * crate::greens::self_cell_integral(ra, g.h_r, g.h_z)
                + 3.0 * 3.0 * g.nu(b) * crate::greens::self_cell_integral(rb, g.h_r, g.h_z));
        assert!((e - cross - selfs).abs() < 1e-12 * e.abs(), "{e} {cross} {selfs}");
    }

    #[test]
    fn j_vanishes_for_negative_stream() {
        let g = half_plane(16);
        let psi = StreamField::from_fn(&g, |r, _| -r);
        let zeta = vec![5.0; g.len()];
        assert_eq!(core_energy_j(&psi, &zeta, &g), 0.0);
        let mut psi = StreamField::zeros(&g);
        let k = g.locate(1.0, 0.0);
        psi[k] = 0.25;
        let mut zeta = vec![0.0; g.len()];
        zeta[k] = 8.0;
        assert!((core_energy_j(&psi, &zeta, &g) - 0.5 * 0.25 * 8.0 * g.nu(k)).abs() < 1e-15);
    }

    #[test]
    fn point_mass_has_zero_bifurcation_distance() {
        let g = half_plane(32);
        let k = g.locate(1.0, 0.0);
        let mut zeta = vec![0.0; g.len()];
        zeta[k] = 1.0 / g.nu(k);
        let (psi, _) = EllipticSolver::new(&g).solve(&zeta).unwrap();
        let d = green_bifurcation_distance(&psi, &zeta, &g).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn point_mass_keeps_first_moments() {
        let g = half_plane(32);
        let zeta = point_mass(&g, (1.013, -0.271));
        let m: f64 = (0..g.len()).map(|k| zeta[k] * g.nu(k)).sum();
        let mr: f64 = (0..g.len()).map(|k| zeta[k] * g.nu(k) * g.center(k).0).sum();
        let mz: f64 = (0..g.len()).map(|k| zeta[k] * g.nu(k) * g.center(k).1).sum();
        assert!((m - 1.0).abs() < 1e-14);
        assert!((mr - 1.013).abs() < 1e-13 && (mz + 0.271).abs() < 1e-13);
    }

    #[test]
    fn resolution_gate() {
        let mut p = RunParams::new(MeridionalDomain::HalfPlane, 100.0, 1.0 / (16.0 * PI * PI), 64, 128).unwrap();
        assert!(p.check_resolution().is_err());
        p.n_r = 512;
        p.n_z = 1024;
        assert!(p.check_resolution().is_ok());
    }

    #[test]
    fn infeasible_strength_in_bounded_domain() {
        let d = MeridionalDomain::Disk { b: 1.0 };
        let p = RunParams::new(d, 0.1, 0.0, 32, 64).unwrap();
        assert!(matches!(p.validate(), Err(RingError::Infeasible { .. })));
    }
}
