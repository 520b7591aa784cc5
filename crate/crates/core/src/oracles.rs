//! Independent reference values: Hill's spherical vortex, a direct double-sum
//! energy and a sort-based threshold selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Grid, MeridionalDomain};
use crate::error::{Result, RingError};
use crate::field::StreamField;
use crate::greens::{ring_green_unchecked, self_cell_integral};

/// Hill's spherical vortex of radius `a` travelling at speed `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillVortex {
    pub a: f64,
    pub u: f64,
}

/// Closed-form fields of Hill's vortex sampled on a grid.
#[derive(Debug, Clone)]
pub struct HillFields {
    /// cell averages of the potential vorticity `15U/(2a²)` inside the sphere
    pub zeta: Vec<f64>,
    /// stream function in the frame of the vortex (uniform stream `-U` at infinity)
    pub psi: StreamField,
    /// stream function of the vortex alone, `psi + U r²/2`
    pub psi_induced: StreamField,
}

impl HillVortex {
    pub fn new(a: f64, u: f64) -> Result<Self> {
        if !(a > 0.0 && u > 0.0 && a.is_finite() && u.is_finite()) {
            return Err(RingError::InvalidParameter(format!("need a > 0 and U > 0, got a={a}, U={u}")));
        }
        Ok(Self { a, u })
    }

    pub fn vorticity(&self) -> f64 {
        7.5 * self.u / (self.a * self.a)
    }

    /// Stream function in the co-moving frame.
    pub fn psi(&self, r: f64, z: f64) -> f64 {
        let (a, u) = (self.a, self.u);
        let rho2 = r * r + z * z;
        if rho2 <= a * a {
            0.75 * u * r * r * (1.0 - rho2 / (a * a))
        } else {
            -0.5 * u * r * r * (1.0 - a.powi(3) / (rho2 * rho2.sqrt()))
        }
    }

    /// Velocity `(v_r, v_z)` in the co-moving frame.
    pub fn velocity(&self, r: f64, z: f64) -> (f64, f64) {
        let (a, u) = (self.a, self.u);
        let rho2 = r * r + z * z;
        if rho2 <= a * a {
            // ψ = c (r² - (r⁴ + r² z²)/a²), c = 3U/4
            let c = 0.75 * u;
            let dpsi_dz = -c * 2.0 * r * r * z / (a * a);
            let dpsi_dr = c * (2.0 * r - (4.0 * r.powi(3) + 2.0 * r * z * z) / (a * a));
            (-dpsi_dz / r, dpsi_dr / r)
        } else {
            let rho = rho2.sqrt();
            let a3 = a.powi(3);
            // ψ = -U/2 (r² - a³ r² ρ^{-3})
            let dpsi_dr = -0.5 * u * (2.0 * r - a3 * (2.0 * r / rho.powi(3) - 3.0 * r.powi(3) / rho.powi(5)));
            let dpsi_dz = -0.5 * u * (3.0 * a3 * r * r * z / rho.powi(5));
            (-dpsi_dz / r, dpsi_dr / r)
        }
    }
}

/// Samples Hill's vortex on a whole-space grid whose window contains the sphere.
///
/// The vorticity is averaged over 8 x 8 sub-cells so the jump at the sphere is
/// represented by partial cells.
pub fn hill_vortex_fields(hill: &HillVortex, grid: &Grid) -> Result<HillFields> {
    if !matches!(grid.domain, MeridionalDomain::HalfPlane) {
        return Err(RingError::InvalidDomain("Hill's vortex lives in the whole space".into()));
    }
    if hill.a >= grid.window.r_max || hill.a >= grid.window.z_max {
        return Err(RingError::InvalidBox(format!(
            "sphere of radius {} is not inside the window ({}, {})",
            hill.a, grid.window.r_max, grid.window.z_max
        )));
    }
    const SUB: usize = 8;
    let q = hill.vorticity();
    let zeta = (0..grid.len())
        .map(|k| {
            let (r, z) = grid.center(k);
            let mut inside = 0;
            for p in 0..SUB {
                for s in 0..SUB {
                    let rr = r + grid.h_r * ((p as f64 + 0.5) / SUB as f64 - 0.5);
                    let zz = z + grid.h_z * ((s as f64 + 0.5) / SUB as f64 - 0.5);
                    if rr * rr + zz * zz < hill.a * hill.a {
                        inside += 1;
                    }
                }
            }
            q * inside as f64 / (SUB * SUB) as f64
        })
        .collect();
    let psi = StreamField::from_fn(grid, |r, z| hill.psi(r, z));
    let psi_induced = StreamField::from_fn(grid, |r, z| hill.psi(r, z) + 0.5 * hill.u * r * r);
    Ok(HillFields { zeta, psi, psi_induced })
}

/// `½ Σ_i Σ_j ζ_i G(x_i, x_j) ζ_j ν_i ν_j` with the whole-space kernel, the
/// diagonal replaced by the integral of the kernel over the cell.
pub fn brute_force_energy(zeta: &[f64], grid: &Grid) -> Result<f64> {
    if !matches!(grid.domain, MeridionalDomain::HalfPlane) {
        return Err(RingError::UnsupportedBackend("the direct sum needs the whole-space kernel".into()));
    }
    let cells: Vec<(f64, f64, f64, f64)> = (0..grid.len())
        .filter(|&k| zeta[k] != 0.0)
        .map(|k| {
            let (r, z) = grid.center(k);
            (r, z, zeta[k], grid.nu(k))
        })
        .collect();
    let rows: Vec<f64> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(r, z, q, nu))| {
            let mut row = q * q * nu * self_cell_integral(r, grid.h_r, grid.h_z);
            for (j, &(r2, z2, q2, nu2)) in cells.iter().enumerate() {
                if i != j {
                    row += q * nu * ring_green_unchecked(r, z, r2, z2) * q2 * nu2;
                }
            }
            row
        })
        .collect();
    Ok(0.5 * rows.iter().sum::<f64>())
}

/// Threshold selection by a full sort: cells in decreasing `phi` are accumulated
/// until their ν-mass reaches `1/λ`.
pub fn brute_force_quantile(phi: &[f64], grid: &Grid, lambda: f64) -> Result<(Vec<f64>, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(RingError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let target = 1.0 / lambda;
    let mut order: Vec<usize> = (0..grid.len())
        .filter(|&k| grid.is_active(k) && phi[k] != f64::NEG_INFINITY)
        .collect();
    let available: f64 = order.iter().map(|&k| grid.nu(k)).sum();
    if order.is_empty() || target > available {
        return Err(RingError::Infeasible {
            requested: target,
            available,
        });
    }
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]));
    let mut acc = 0.0;
    let mut mu = phi[*order.last().unwrap()];
    for &k in &order {
        acc += grid.nu(k);
        if acc >= target {
            mu = phi[k];
            break;
        }
    }
    let mut above = 0.0;
    let mut tie = 0.0;
    for k in 0..grid.len() {
        if !grid.is_active(k) || phi[k] == f64::NEG_INFINITY {
            continue;
        }
        if phi[k] > mu {
            above += grid.nu(k);
        } else if phi[k] == mu {
            tie += grid.nu(k);
        }
    }
    let frac = ((target - above) / tie).clamp(0.0, 1.0);
    let weights = (0..grid.len())
        .map(|k| {
            if !grid.is_active(k) || phi[k] == f64::NEG_INFINITY {
                0.0
            } else if phi[k] > mu {
                1.0
            } else if phi[k] == mu {
                frac
            } else {
                0.0
            }
        })
        .collect();
    Ok((weights, mu))
}
