//! Velocity, pressure and weak-steadiness measurements from a stream function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::field::StreamField;

/// Meridional velocity at a cell centre.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocitySample {
    pub v_r: f64,
    pub v_z: f64,
}

impl VelocitySample {
    pub fn speed(&self) -> f64 {
        self.v_r.hypot(self.v_z)
    }
}

/// `(1/r) ∂_r ψ` and `∂_z ψ` at cell `k`.
///
/// The radial derivative is differenced in `s = r²/2`, where `(1/r) ∂_r = ∂_s`,
/// with the axis value `ψ = 0` at `s = 0`; window rows fall back to one-sided
/// differences.
fn derivatives(psi: &[f64], grid: &Grid, k: usize) -> (f64, f64) {
    let (i, j) = grid.ij(k);
    let s = |i: usize| 0.5 * grid.r(i) * grid.r(i);
    let (nr, nz) = (grid.n_r, grid.n_z);
    let ds = if nr == 1 {
        0.0
    } else if i == 0 {
        psi[grid.idx(1, j)] / s(1)
    } else if i + 1 == nr {
        (psi[k] - psi[grid.idx(i - 1, j)]) / (s(i) - s(i - 1))
    } else {
        (psi[grid.idx(i + 1, j)] - psi[grid.idx(i - 1, j)]) / (s(i + 1) - s(i - 1))
    };
    let dz = if j == 0 {
        (psi[grid.idx(i, 1)] - psi[k]) / grid.h_z
    } else if j + 1 == nz {
        (psi[k] - psi[grid.idx(i, j - 1)]) / grid.h_z
    } else {
        (psi[grid.idx(i, j + 1)] - psi[grid.idx(i, j - 1)]) / (2.0 * grid.h_z)
    };
    (ds, dz)
}

/// `v_r = -(1/r) ∂_z ψ`, `v_z = (1/r) ∂_r ψ` at every cell of the window.
pub fn velocity_from_stream(psi_total: &StreamField, grid: &Grid) -> Vec<VelocitySample> {
    let psi = psi_total.values();
    (0..grid.len())
        .map(|k| {
            let (ds, dz) = derivatives(psi, grid, k);
            VelocitySample {
                v_r: -dz / grid.center(k).0,
                v_z: ds,
            }
        })
        .collect()
}

/// `P = λ ψ⁺ - |v|²/2` for the shifted stream function `psi`.
pub fn pressure_from_stream(psi: &StreamField, lambda: f64, grid: &Grid) -> StreamField {
    let vel = velocity_from_stream(psi, grid);
    let values = psi
        .values()
        .iter()
        .zip(&vel)
        .map(|(&p, v)| lambda * p.max(0.0) - 0.5 * (v.v_r * v.v_r + v.v_z * v.v_z))
        .collect();
    StreamField::from_values(grid, values)
}

/// A `cos²` bump `φ(ρ) = cos²(πρ / 2a)` of radius `a` centred at `(r, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestBump {
    pub r: f64,
    pub z: f64,
    pub radius: f64,
}

impl TestBump {
    fn gradient(&self, r: f64, z: f64) -> Option<(f64, f64)> {
        let (dr, dz) = (r - self.r, z - self.z);
        let rho = dr.hypot(dz);
        if rho >= self.radius || rho == 0.0 {
            return if rho == 0.0 { Some((0.0, 0.0)) } else { None };
        }
        let dphi = -(PI / (2.0 * self.radius)) * (PI * rho / self.radius).sin();
        Some((dphi * dr / rho, dphi * dz / rho))
    }
}

/// Default bank: a 5 x 5 lattice of bumps spanning the support of `zeta`, each
/// with radius equal to the support's larger half-extent (at least four cells).
pub fn default_test_bank(zeta: &[f64], grid: &Grid) -> Vec<TestBump> {
    let pts: Vec<(f64, f64)> = (0..grid.len()).filter(|&k| zeta[k] > 0.0).map(|k| grid.center(k)).collect();
    if pts.is_empty() {
        return vec![];
    }
    let (mut r0, mut r1, mut z0, mut z1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(r, z) in &pts {
        r0 = r0.min(r);
        r1 = r1.max(r);
        z0 = z0.min(z);
        z1 = z1.max(z);
    }
    let radius = (0.5 * (r1 - r0)).max(0.5 * (z1 - z0)).max(4.0 * grid.h_max());
    let (rc, zc) = (0.5 * (r0 + r1), 0.5 * (z0 + z1));
    let mut bank = Vec::with_capacity(25);
    for a in -2..=2 {
        for b in -2..=2 {
            let r = rc + 0.5 * radius * a as f64;
            if r - radius <= 0.0 {
                continue;
            }
            bank.push(TestBump {
                r,
                z: zc + 0.5 * radius * b as f64,
                radius,
            });
        }
    }
    bank
}

/// `max_φ |Σ ζ (∇⊥ψ · ∇φ) h_r h_z| / (Σ |∇φ|² h_r h_z)^{1/2}` over `bank`, with
/// `∇⊥ψ = (-∂_z ψ, ∂_r ψ)`.
pub fn weak_residual_with_bank(psi_total: &StreamField, zeta: &[f64], grid: &Grid, bank: &[TestBump]) -> f64 {
    let psi = psi_total.values();
    let area = grid.h_r * grid.h_z;
    let support: Vec<usize> = (0..grid.len()).filter(|&k| zeta[k] != 0.0).collect();
    bank.iter()
        .map(|bump| {
            let mut pairing = 0.0;
            for &k in &support {
                let (r, z) = grid.center(k);
                if let Some((pr, pz)) = bump.gradient(r, z) {
                    let (ds, dz) = derivatives(psi, grid, k);
                    let dr = ds * r;
                    pairing += zeta[k] * (-dz * pr + dr * pz) * area;
                }
            }
            let mut energy = 0.0;
            for k in 0..grid.len() {
                let (r, z) = grid.center(k);
                if let Some((pr, pz)) = bump.gradient(r, z) {
                    energy += (pr * pr + pz * pz) * area;
                }
            }
            if energy > 0.0 {
                pairing.abs() / energy.sqrt()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Weak steadiness residual over [`default_test_bank`].
pub fn weak_steadiness_residual(psi_total: &StreamField, zeta: &[f64], grid: &Grid) -> f64 {
    weak_residual_with_bank(psi_total, zeta, grid, &default_test_bank(zeta, grid))
}
