//! The discrete axisymmetric operator
//! `𝓛ψ = -(1/r) ∂_r((1/r) ∂_r ψ) - (1/r²) ∂_zz ψ` and its inverse `K`.
//!
//! The radial part is written in conservative form with face fluxes
//! `F_{i+1/2} = 2 (ψ_{i+1} - ψ_i) / (r_{i+1}² - r_i²)`, which is exact for
//! `ψ = r²` and makes `r_i h_r 𝓛` a symmetric positive definite matrix. The axis
//! face uses the ghost value `ψ = 0` at `r = 0`; window faces use the
//! antisymmetric ghost so that `ψ = 0` on the face; cells outside the domain are
//! held at zero.
//!
//! Solves on a full rectangle are direct: a sine transform in `z` decouples the
//! system into one tridiagonal solve in `r` per axial mode. Domains with
//! excluded cells (disk, exterior ball) are solved by conjugate gradients
//! preconditioned with the rectangle solver.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::domain::{Grid, MeridionalDomain};
use crate::error::{Result, RingError};
use crate::field::StreamField;

/// Stencil coefficients of `A = diag(r_i h_r) 𝓛`.
#[derive(Debug, Clone)]
struct Stencil {
    n_r: usize,
    n_z: usize,
    /// coupling to `i - 1` (zero for the axis row)
    west: Vec<f64>,
    /// coupling to `i + 1` (zero for the last row)
    east: Vec<f64>,
    /// radial diagonal, including axis and wall ghosts
    diag_r: Vec<f64>,
    /// axial coupling `h_r / (r_i h_z²)`
    axial: Vec<f64>,
    /// `r_i h_r`
    volume: Vec<f64>,
}

impl Stencil {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_r;
        let r = grid.r_centers();
        let h_r = grid.h_r;
        let face = |a: f64, b: f64| 2.0 / (b * b - a * a);
        let mut west = vec![0.0; n];
        let mut east = vec![0.0; n];
        let mut diag_r = vec![0.0; n];
        for i in 0..n {
            let tw = if i == 0 { face(0.0, r[0]) } else { face(r[i - 1], r[i]) };
            let te = if i + 1 == n {
                // ghost at r + h with value -ψ
                2.0 * face(r[i], r[i] + h_r)
            } else {
                face(r[i], r[i + 1])
            };
            if i > 0 {
                west[i] = tw;
            }
            if i + 1 < n {
                east[i] = te;
            }
            diag_r[i] = tw + te;
        }
        let axial = r.iter().map(|&ri| h_r / (ri * grid.h_z * grid.h_z)).collect();
        let volume = r.iter().map(|&ri| ri * h_r).collect();
        Self {
            n_r: n,
            n_z: grid.n_z,
            west,
            east,
            diag_r,
            axial,
            volume,
        }
    }

    /// `out = A psi` on active cells; inactive cells are treated as zero and produce zero.
    fn apply(&self, psi: &[f64], mask: Option<&[bool]>, out: &mut [f64]) {
        let nz = self.n_z;
        let active = |k: usize| mask.map_or(true, |m| m[k]);
        out.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                let k = i * nz + j;
                if !active(k) {
                    *o = 0.0;
                    continue;
                }
                let cz = self.axial[i];
                let ghost_z = if j == 0 || j + 1 == nz { cz } else { 0.0 };
                let mut acc = (self.diag_r[i] + 2.0 * cz + ghost_z) * psi[k];
                let val = |kk: usize| if active(kk) { psi[kk] } else { 0.0 };
                if i > 0 {
                    acc -= self.west[i] * val(k - nz);
                }
                if i + 1 < self.n_r {
                    acc -= self.east[i] * val(k + nz);
                }
                if j > 0 {
                    acc -= cz * val(k - 1);
                }
                if j + 1 < nz {
                    acc -= cz * val(k + 1);
                }
                *o = acc;
            }
        });
    }
}

/// `𝓛ψ` at every active cell, with the boundary conventions of the solver
/// (zero on the axis, window faces and excluded cells).
pub fn apply_l(psi: &StreamField, grid: &Grid) -> StreamField {
    let st = Stencil::new(grid);
    let mask = grid.has_mask().then(|| grid.mask());
    let mut out = vec![0.0; grid.len()];
    st.apply(psi.values(), mask, &mut out);
    for (k, o) in out.iter_mut().enumerate() {
        let (i, _) = grid.ij(k);
        *o /= st.volume[i];
    }
    StreamField::from_values(grid, out)
}

/// Direct solver for the full rectangle by sine transform in `z`.
struct RectangleSolver {
    stencil: Stencil,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `2 - 2 cos(π m / N)` for m = 1..=N
    modes: Vec<f64>,
}

impl RectangleSolver {
    fn new(stencil: Stencil) -> Self {
        let n = stencil.n_z;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(2 * n);
        let inv = planner.plan_fft_inverse(2 * n);
        let modes = (1..=n)
            .map(|m| 2.0 - 2.0 * (std::f64::consts::PI * m as f64 / n as f64).cos())
            .collect();
        Self { stencil, fwd, inv, modes }
    }

    /// Sine coefficients `c_m` (m = 1..=N) with `x_j = Σ c_m sin(π m (j + 1/2) / N)`.
    fn dst(&self, x: &[f64], buf: &mut [Complex64], scratch: &mut [Complex64], out: &mut [f64]) {
        let n = x.len();
        for (j, &v) in x.iter().enumerate() {
            buf[j] = Complex64::new(v, 0.0);
            buf[2 * n - 1 - j] = Complex64::new(-v, 0.0);
        }
        self.fwd.process_with_scratch(buf, scratch);
        for m in 1..=n {
            let th = std::f64::consts::PI * m as f64 / (2.0 * n as f64);
            let y = buf[m % (2 * n)];
            let coeff = 0.5 * (th.sin() * y.re - th.cos() * y.im);
            let norm = if m == n { n as f64 } else { 0.5 * n as f64 };
            out[m - 1] = coeff / norm;
        }
    }

    fn idst(&self, c: &[f64], buf: &mut [Complex64], scratch: &mut [Complex64], out: &mut [f64]) {
        let n = c.len();
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for m in 1..=n {
            let th = std::f64::consts::PI * m as f64 / (2.0 * n as f64);
            buf[m] = Complex64::from_polar(c[m - 1], th);
        }
        self.inv.process_with_scratch(buf, scratch);
        for (j, o) in out.iter_mut().enumerate() {
            *o = buf[j].im;
        }
    }

    /// Solves `A x = b` on the full rectangle.
    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let (nr, nz) = (self.stencil.n_r, self.stencil.n_z);
        let scratch_len = self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len());
        // sine coefficients, row-major in r
        let mut coef = vec![0.0; nr * nz];
        coef.par_chunks_mut(nz).zip(b.par_chunks(nz)).for_each_init(
            || (vec![Complex64::new(0.0, 0.0); 2 * nz], vec![Complex64::new(0.0, 0.0); scratch_len]),
            |(buf, scratch), (c, row)| self.dst(row, buf, scratch, c),
        );
        // transpose to mode-major and solve one tridiagonal system per mode
        let mut by_mode = vec![0.0; nr * nz];
        by_mode.par_chunks_mut(nr).enumerate().for_each(|(m, col)| {
            for (i, v) in col.iter_mut().enumerate() {
                *v = coef[i * nz + m];
            }
        });
        let st = &self.stencil;
        by_mode.par_chunks_mut(nr).enumerate().for_each_init(
            || vec![0.0; nr],
            |cp, (m, col)| {
                let lam = self.modes[m];
                // Thomas algorithm; sub-diagonal -west[i], super-diagonal -east[i]
                let diag = |i: usize| st.diag_r[i] + st.axial[i] * lam;
                let mut beta = diag(0);
                cp[0] = -st.east[0] / beta;
                col[0] /= beta;
                for i in 1..nr {
                    beta = diag(i) + st.west[i] * cp[i - 1];
                    cp[i] = -st.east[i] / beta;
                    col[i] = (col[i] + st.west[i] * col[i - 1]) / beta;
                }
                for i in (0..nr - 1).rev() {
                    col[i] -= cp[i] * col[i + 1];
                }
            },
        );
        coef.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            for (m, v) in row.iter_mut().enumerate() {
                *v = by_mode[m * nr + i];
            }
        });
        x.par_chunks_mut(nz).zip(coef.par_chunks(nz)).for_each_init(
            || (vec![Complex64::new(0.0, 0.0); 2 * nz], vec![Complex64::new(0.0, 0.0); scratch_len]),
            |(buf, scratch), (row, c)| self.idst(c, buf, scratch, row),
        );
    }
}

/// Outcome of one elliptic solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    /// relative residual after each iteration
    pub history: Vec<f64>,
}

impl SolveReport {
    /// CSV with header `iteration,relative_residual`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,relative_residual\n");
        for (n, r) in self.history.iter().enumerate() {
            s.push_str(&format!("{},{:.6e}\n", n + 1, r));
        }
        s
    }
}

/// Reusable inverse of the discrete operator on one grid.
pub struct EllipticSolver {
    grid: Grid,
    rect: RectangleSolver,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl EllipticSolver {
    pub fn new(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            rect: RectangleSolver::new(Stencil::new(grid)),
            tolerance: 1e-9,
            max_iters: 500,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Source that, added to `ζ`, makes the solve take the values `g(r, z)` on
    /// the outer radial face and the two axial faces of the window instead of 0.
    pub fn dirichlet_source(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let grid = &self.grid;
        let st = &self.rect.stencil;
        let (n_r, n_z) = (grid.n_r, grid.n_z);
        let (r_max, z_max) = (grid.window.r_max, grid.window.z_max);
        let mut src = vec![0.0; grid.len()];
        for i in 0..n_r {
            let r = grid.r(i);
            let cz = 2.0 * st.axial[i] / st.volume[i];
            src[grid.idx(i, 0)] += cz * g(r, -z_max);
            src[grid.idx(i, n_z - 1)] += cz * g(r, z_max);
        }
        let last = n_r - 1;
        let face = (st.diag_r[last] - st.west[last]) / st.volume[last];
        for j in 0..n_z {
            src[grid.idx(last, j)] += face * g(r_max, grid.z(j));
        }
        for (k, s) in src.iter_mut().enumerate() {
            if !grid.is_active(k) {
                *s = 0.0;
            }
        }
        src
    }

    fn rhs(&self, zeta: &[f64]) -> Vec<f64> {
        let nz = self.grid.n_z;
        zeta.iter()
            .enumerate()
            .map(|(k, &v)| if self.grid.is_active(k) { v * self.rect.stencil.volume[k / nz] } else { 0.0 })
            .collect()
    }

    fn mask(&self) -> Option<&[bool]> {
        self.grid.has_mask().then(|| self.grid.mask())
    }

    fn residual(&self, b: &[f64], x: &[f64]) -> f64 {
        let mut ax = vec![0.0; b.len()];
        self.rect.stencil.apply(x, self.mask(), &mut ax);
        let bn = norm(b);
        if bn == 0.0 {
            return norm(&ax);
        }
        ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / bn
    }

    /// `Kζ` with zero boundary values, starting from `guess` when conjugate gradients are used.
    pub fn solve_with_guess(&self, zeta: &[f64], guess: Option<&StreamField>) -> Result<(StreamField, SolveReport)> {
        assert_eq!(zeta.len(), self.grid.len(), "zeta must cover the grid");
        let b = self.rhs(zeta);
        if b.iter().all(|&v| v == 0.0) {
            let report = SolveReport {
                iterations: 0,
                residual: 0.0,
                history: vec![],
            };
            return Ok((StreamField::zeros(&self.grid), report));
        }
        let (x, report) = match self.mask() {
            None => {
                let mut x = vec![0.0; b.len()];
                self.rect.solve(&b, &mut x);
                let res = self.residual(&b, &x);
                (
                    x,
                    SolveReport {
                        iterations: 1,
                        residual: res,
                        history: vec![res],
                    },
                )
            }
            Some(mask) => self.pcg(&b, mask, guess)?,
        };
        if !(report.residual <= self.tolerance) {
            return Err(RingError::SolverFailure {
                iterations: report.iterations,
                residual: report.residual,
            });
        }
        Ok((StreamField::from_values(&self.grid, x), report))
    }

    pub fn solve(&self, zeta: &[f64]) -> Result<(StreamField, SolveReport)> {
        self.solve_with_guess(zeta, None)
    }

    fn precondition(&self, r: &[f64], mask: &[bool], z: &mut [f64]) {
        self.rect.solve(r, z);
        z.par_iter_mut().zip(mask.par_iter()).for_each(|(v, &m)| {
            if !m {
                *v = 0.0
            }
        });
    }

    fn pcg(&self, b: &[f64], mask: &[bool], guess: Option<&StreamField>) -> Result<(Vec<f64>, SolveReport)> {
        let n = b.len();
        let st = &self.rect.stencil;
        let mut x = match guess {
            Some(g) => g.values().iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect(),
            None => vec![0.0; n],
        };
        let mut ax = vec![0.0; n];
        st.apply(&x, Some(mask), &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let bn = norm(b);
        let mut z = vec![0.0; n];
        self.precondition(&r, mask, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut history = Vec::new();
        let mut res = norm(&r) / bn;
        let mut it = 0;
        while res > self.tolerance * 0.1 && it < self.max_iters {
            it += 1;
            st.apply(&p, Some(mask), &mut ax);
            let alpha = rz / dot(&p, &ax);
            x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(ax.par_iter()).for_each(|(r, a)| *r -= alpha * a);
            res = norm(&r) / bn;
            history.push(res);
            if res <= self.tolerance * 0.1 {
                break;
            }
            self.precondition(&r, mask, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut().zip(z.par_iter()).for_each(|(p, z)| *p = z + beta * *p);
        }
        let residual = self.residual(b, &x);
        Ok((
            x,
            SolveReport {
                iterations: it,
                residual,
                history,
            },
        ))
    }
}

/// Chunked so the summation order, and hence the result, is independent of scheduling.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x * y).sum())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `Kζ` for the potential vorticity values `zeta` on `grid`, which must have been
/// built for `domain`.
pub fn solve_k(zeta: &[f64], grid: &Grid, domain: &MeridionalDomain) -> Result<StreamField> {
    if grid.domain != *domain {
        return Err(RingError::InvalidGrid(format!(
            "grid was built for {:?}, not {:?}",
            grid.domain, domain
        )));
    }
    EllipticSolver::new(grid).solve(zeta).map(|(f, _)| f)
}
