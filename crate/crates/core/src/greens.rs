//! The whole-space ring Green's function of the axisymmetric operator, its
//! complete-elliptic-integral form, the sigma estimate and the near-diagonal
//! logarithmic expansion.
//!
//! With `dν = 2π r' dr' dz'` the whole-space inverse is
//! `Kζ(x) = ∫ G(x, x') ζ(x') dν(x')` where
//!
//! ```text
//! G(r, z, r', z') = r r' / (8π²) ∫_{-π}^{π} cos θ dθ / sqrt((z - z')² + r² + r'² - 2 r r' cos θ).
//! ```

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Grid, MeridionalDomain};
use crate::error::{Result, RingError};
use crate::field::StreamField;

/// A point of the meridional half-plane where the kernel is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub r: f64,
    pub z: f64,
}

impl KernelPoint {
    pub fn new(r: f64, z: f64) -> Self {
        Self { r, z }
    }

    fn dist(&self, other: &KernelPoint) -> f64 {
        (self.r - other.r).hypot(self.z - other.z)
    }
}

/// Normalised separation `|x - x'| / sqrt(4 r r')`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SigmaValue(pub f64);

/// Complete elliptic integrals `(K(k), E(k))` of modulus `k` by the
/// arithmetic-geometric mean.
pub fn elliptic_ke(k: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&k) {
        return Err(RingError::SingularModulus(k));
    }
    Ok(agm_ke(k * k, (1.0 - k * k).sqrt()))
}

/// `(K, E)` from the parameter `m = k²` and the complementary modulus
/// `k' = sqrt(1 - m)`, passed separately so `k'` keeps full relative precision
/// when `m` is close to 1.
fn agm_ke(m: f64, kp: f64) -> (f64, f64) {
    let (mut a, mut b) = (1.0_f64, kp);
    let mut c2 = m;
    let mut pow2 = 0.5;
    let mut sum = pow2 * c2;
    for _ in 0..64 {
        if c2.sqrt() <= 1e-15 * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        let c = 0.5 * (a - b);
        c2 = c * c;
        a = an;
        b = bn;
        pow2 *= 2.0;
        sum += pow2 * c2;
    }
    let kk = PI / (2.0 * a);
    (kk, kk * (1.0 - sum))
}

/// `((2 - m) K(m) - 2 E(m)) / m` in the parameter `m = k²`.
fn ring_bracket(m: f64, kp: f64) -> f64 {
    if m < 0.1 {
        bracket_series(m)
    } else {
        let (kk, ee) = agm_ke(m, kp);
        ((2.0 - m) * kk - 2.0 * ee) / m
    }
}

/// Power series of the bracket, used for small `m` where the closed form cancels.
fn bracket_series(m: f64) -> f64 {
    // (2-m)K - 2E = π/2 Σ_{n≥2} [4n a_n/(2n-1) - a_{n-1}] m^n, a_n = (C(2n,n)/4^n)²
    let mut a_prev = 0.25; // a_1
    let mut sum = 0.0;
    let mut mp = m; // m^(n-1)
    for n in 2..80 {
        let nf = n as f64;
        let ratio = (2.0 * nf - 1.0) / (2.0 * nf);
        let a_n = a_prev * ratio * ratio;
        let term = (4.0 * nf * a_n / (2.0 * nf - 1.0) - a_prev) * mp;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        a_prev = a_n;
        mp *= m;
    }
    0.5 * PI * sum
}

/// `σ = |x - x'| / sqrt(4 r r')`.
pub fn sigma(x: KernelPoint, x2: KernelPoint) -> SigmaValue {
    SigmaValue(x.dist(&x2) / (4.0 * x.r * x2.r).sqrt())
}

/// Whole-space ring Green's function in closed form.
pub fn ring_green(x: KernelPoint, x2: KernelPoint) -> Result<f64> {
    if x.r == x2.r && x.z == x2.z {
        return Err(RingError::SingularEvaluation);
    }
    Ok(ring_green_unchecked(x.r, x.z, x2.r, x2.z))
}

/// Closed form without argument checks; points on the axis give 0.
#[inline]
pub fn ring_green_unchecked(r: f64, z: f64, r2: f64, z2: f64) -> f64 {
    if r <= 0.0 || r2 <= 0.0 {
        return 0.0;
    }
    let dz = z - z2;
    let s2 = (r + r2) * (r + r2) + dz * dz;
    let m = 4.0 * r * r2 / s2;
    let kp = ((r - r2).hypot(dz) / s2.sqrt()).min(1.0);
    r * r2 / (2.0 * PI * PI * s2.sqrt()) * ring_bracket(m, kp)
}

/// The σ estimate `sqrt(r r') / (8π²) · asinh(1/σ)`.
///
/// The kernel exceeds it for σ below roughly 0.15 (by a factor approaching 2
/// as σ → 0); twice this value bounds the kernel for every σ.
pub fn green_sigma_bound(x: KernelPoint, x2: KernelPoint) -> f64 {
    let s = sigma(x, x2).0;
    (x.r * x2.r).sqrt() / (8.0 * PI * PI) * (1.0 / s).asinh()
}

/// Leading logarithmic terms of the near-diagonal expansion about the reference
/// radius `l = sqrt(r r')`, in the same normalisation as [`ring_green`]:
/// `l²/(4π² r') · (log(8 l / |x - x'|) - 2)`.
pub fn green_leading_log(x: KernelPoint, x2: KernelPoint) -> Result<f64> {
    let d = x.dist(&x2);
    let limit = 0.2 * x.r;
    if d > limit {
        return Err(RingError::OutOfExpansionRange { separation: d, limit });
    }
    if d == 0.0 {
        return Err(RingError::SingularEvaluation);
    }
    let l = (x.r * x2.r).sqrt();
    Ok(l * l / (4.0 * PI * PI * x2.r) * ((8.0 * l / d).ln() - 2.0))
}

/// `∫∫_{[-a,a]x[-b,b]} log sqrt(x² + y²) dx dy`.
fn rect_log_integral(a: f64, b: f64) -> f64 {
    // F(a, b) = ∫_0^a ∫_0^b ln(x² + y²) dy dx
    let f = a * b * ((a * a + b * b).ln() - 3.0) + a * a * (b / a).atan() + b * b * (a / b).atan();
    2.0 * f
}

/// Integral of the kernel over the source cell that contains the target point,
/// from the leading terms of the near-diagonal expansion.
pub fn self_cell_integral(r: f64, h_r: f64, h_z: f64) -> f64 {
    let l = r;
    let area = h_r * h_z;
    l * l / (2.0 * PI) * (area * ((8.0 * l).ln() - 2.0) - rect_log_integral(0.5 * h_r, 0.5 * h_z))
}

/// Direct-quadrature `Kζ` on the whole-space grid, evaluated at every active cell.
pub fn quadrature_apply_k(zeta: &[f64], grid: &Grid) -> Result<StreamField> {
    let targets: Vec<usize> = (0..grid.len()).filter(|&k| grid.is_active(k)).collect();
    let vals = quadrature_apply_k_at(zeta, grid, &targets)?;
    let mut out = StreamField::zeros(grid);
    for (t, v) in targets.into_iter().zip(vals) {
        out[t] = v;
    }
    Ok(out)
}

/// Direct-quadrature `Kζ` at the listed cells only.
pub fn quadrature_apply_k_at(zeta: &[f64], grid: &Grid, targets: &[usize]) -> Result<Vec<f64>> {
    if !matches!(grid.domain, MeridionalDomain::HalfPlane) {
        return Err(RingError::UnsupportedBackend(format!(
            "direct quadrature needs the whole-space kernel, domain is {}",
            grid.domain.kind().name()
        )));
    }
    assert_eq!(zeta.len(), grid.len(), "zeta must cover the grid");
    let sources: Vec<(f64, f64, f64, usize)> = zeta
        .iter()
        .enumerate()
        .filter(|&(k, &v)| v != 0.0 && grid.is_active(k))
        .map(|(k, &v)| {
            let (r, z) = grid.center(k);
            (r, z, v * grid.nu(k), k)
        })
        .collect();
    let (h_r, h_z) = (grid.h_r, grid.h_z);
    Ok(targets
        .par_iter()
        .map(|&t| {
            let (r, z) = grid.center(t);
            let mut acc = 0.0;
            for &(rs, zs, mass, k) in &sources {
                if k == t {
                    acc += zeta[k] * self_cell_integral(r, h_r, h_z);
                } else {
                    acc += ring_green_unchecked(r, z, rs, zs) * mass;
                }
            }
            acc
        })
        .collect())
}
