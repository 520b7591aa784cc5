//! Admissible meridional domains, their truncations and the uniform cell grid.
//!
//! The meridional half-plane is `{(r, z) : r > 0}`. Every grid is cell-centred and
//! staggered off the axis, so the first row of cell centres sits at `r = h_r / 2`.
//! Each cell carries its exact volume of revolution `2π r h_r h_z` as its
//! nu-weight.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RingError};

/// Weight below which a cell is not considered part of a vortex core.
pub const W_MIN: f64 = 1e-12;

/// The admissible domains of revolution, as seen in the meridional half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MeridionalDomain {
    /// Infinite pipe `0 < r < d`.
    Pipe { d: f64 },
    /// The whole space.
    HalfPlane,
    /// Exterior of the ball of radius `d`.
    ExteriorBall { d: f64 },
    /// Ball of radius `b`.
    Disk { b: f64 },
    /// Finite cylinder `(0, b) x (-c, c)`.
    Rectangle { b: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    Pipe,
    HalfPlane,
    ExteriorBall,
    Disk,
    Rectangle,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Pipe => "pipe",
            DomainKind::HalfPlane => "half_plane",
            DomainKind::ExteriorBall => "exterior_ball",
            DomainKind::Disk => "disk",
            DomainKind::Rectangle => "rectangle",
        }
    }
}

impl MeridionalDomain {
    pub fn kind(&self) -> DomainKind {
        match self {
            MeridionalDomain::Pipe { .. } => DomainKind::Pipe,
            MeridionalDomain::HalfPlane => DomainKind::HalfPlane,
            MeridionalDomain::ExteriorBall { .. } => DomainKind::ExteriorBall,
            MeridionalDomain::Disk { .. } => DomainKind::Disk,
            MeridionalDomain::Rectangle { .. } => DomainKind::Rectangle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(RingError::InvalidDomain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            MeridionalDomain::Pipe { d } | MeridionalDomain::ExteriorBall { d } => positive("d", d),
            MeridionalDomain::HalfPlane => Ok(()),
            MeridionalDomain::Disk { b } => positive("b", b),
            MeridionalDomain::Rectangle { b, c } => {
                positive("b", b)?;
                positive("c", c)
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, MeridionalDomain::Disk { .. } | MeridionalDomain::Rectangle { .. })
    }

    /// Whether the meridional point `(r, z)` (with `r > 0`) lies in the domain.
    pub fn contains(&self, r: f64, z: f64) -> bool {
        if r <= 0.0 {
            return false;
        }
        match *self {
            MeridionalDomain::Pipe { d } => r < d,
            MeridionalDomain::HalfPlane => true,
            MeridionalDomain::ExteriorBall { d } => r * r + z * z > d * d,
            MeridionalDomain::Disk { b } => r * r + z * z < b * b,
            MeridionalDomain::Rectangle { b, c } => r < b && z.abs() < c,
        }
    }

    /// Nu-measure of the domain, when it is finite.
    pub fn volume(&self) -> Option<f64> {
        match *self {
            MeridionalDomain::Disk { b } => Some(4.0 / 3.0 * PI * b.powi(3)),
            MeridionalDomain::Rectangle { b, c } => Some(PI * b * b * 2.0 * c),
            _ => None,
        }
    }
}

/// Computational window `(0, r_max) x (-z_max, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBox {
    pub r_max: f64,
    pub z_max: f64,
}

impl TruncationBox {
    pub fn new(r_max: f64, z_max: f64) -> Self {
        Self { r_max, z_max }
    }

    /// Bounding box of a bounded domain, or the pipe cross-section with the given length.
    pub fn bounding(domain: &MeridionalDomain) -> Option<Self> {
        match *domain {
            MeridionalDomain::Disk { b } => Some(Self::new(b, b)),
            MeridionalDomain::Rectangle { b, c } => Some(Self::new(b, c)),
            _ => None,
        }
    }

    /// Default window for a core expected near radius `r_star`: `factor * r_star` in
    /// both directions for unbounded kinds (the pipe keeps `r_max = d`), the bounding
    /// box for bounded kinds.
    pub fn for_core(domain: &MeridionalDomain, r_star: f64, factor: f64) -> Self {
        match *domain {
            MeridionalDomain::Pipe { d } => Self::new(d, factor * r_star.max(d)),
            MeridionalDomain::HalfPlane => Self::new(factor * r_star, factor * r_star),
            MeridionalDomain::ExteriorBall { d } => {
                let s = factor * r_star.max(d);
                Self::new(s, s)
            }
            _ => Self::bounding(domain).expect("bounded domain"),
        }
    }

    fn check_geometry(&self, domain: &MeridionalDomain) -> Result<()> {
        if !(self.r_max.is_finite() && self.r_max > 0.0 && self.z_max.is_finite() && self.z_max > 0.0) {
            return Err(RingError::InvalidBox(format!(
                "extents must be positive, got r_max={}, z_max={}",
                self.r_max, self.z_max
            )));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        match *domain {
            MeridionalDomain::Pipe { d } => {
                if !close(self.r_max, d) {
                    return Err(RingError::InvalidBox(format!(
                        "pipe window must have r_max = d = {d}, got {}",
                        self.r_max
                    )));
                }
            }
            MeridionalDomain::ExteriorBall { d } => {
                if self.r_max <= d || self.z_max <= d {
                    return Err(RingError::InvalidBox(format!(
                        "window ({}, {}) does not enclose the excluded ball of radius {d}",
                        self.r_max, self.z_max
                    )));
                }
            }
            MeridionalDomain::HalfPlane => {}
            MeridionalDomain::Disk { .. } | MeridionalDomain::Rectangle { .. } => {
                let bb = Self::bounding(domain).unwrap();
                if !close(self.r_max, bb.r_max) || !close(self.z_max, bb.z_max) {
                    return Err(RingError::InvalidBox(format!(
                        "bounded domains use their bounding box ({}, {}), got ({}, {})",
                        bb.r_max, bb.z_max, self.r_max, self.z_max
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that the window strictly contains the expected core circle of radius
    /// `r_star`: at least `3 r*` in both directions for unbounded kinds (radially
    /// the pipe is bounded by its wall).
    pub fn check_core(&self, domain: &MeridionalDomain, r_star: f64) -> Result<()> {
        self.check_geometry(domain)?;
        if domain.is_bounded() {
            return Ok(());
        }
        let need = 3.0 * r_star;
        let radial_ok = matches!(domain, MeridionalDomain::Pipe { .. }) || self.r_max >= need;
        if !radial_ok || self.z_max < need {
            return Err(RingError::InvalidBox(format!(
                "window (r_max={}, z_max={}) must extend to at least 3 r* = {need}",
                self.r_max, self.z_max
            )));
        }
        Ok(())
    }
}

/// Uniform cell-centred grid on a truncation window.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: MeridionalDomain,
    pub window: TruncationBox,
    pub n_r: usize,
    pub n_z: usize,
    pub h_r: f64,
    pub h_z: f64,
    r: Vec<f64>,
    z: Vec<f64>,
    mask: Vec<bool>,
    nu: Vec<f64>,
}

impl Grid {
    /// Builds the grid for `domain` on `window` with `n_r x n_z` cells. Cells are
    /// stored r-major: index `i * n_z + j` for radial index `i`, axial index `j`.
    pub fn build(domain: MeridionalDomain, window: TruncationBox, n_r: usize, n_z: usize) -> Result<Self> {
        domain.validate()?;
        window.check_geometry(&domain)?;
        if n_r < 16 || n_z < 16 {
            return Err(RingError::InvalidGrid(format!("cell counts must be >= 16, got {n_r} x {n_z}")));
        }
        if n_z % 2 != 0 {
            return Err(RingError::InvalidGrid(format!(
                "n_z must be even so the grid is symmetric about z = 0, got {n_z}"
            )));
        }
        let h_r = window.r_max / n_r as f64;
        let h_z = 2.0 * window.z_max / n_z as f64;
        let r: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * h_r).collect();
        let z: Vec<f64> = (0..n_z)
            .map(|j| {
                // mirror exactly about z = 0
                let k = j as f64 - (n_z as f64 - 1.0) / 2.0;
                k * h_z
            })
            .collect();
        let mut mask = Vec::with_capacity(n_r * n_z);
        let mut nu = Vec::with_capacity(n_r * n_z);
        for &ri in &r {
            for &zj in &z {
                mask.push(domain.contains(ri, zj));
                nu.push(2.0 * PI * ri * h_r * h_z);
            }
        }
        Ok(Self {
            domain,
            window,
            n_r,
            n_z,
            h_r,
            h_z,
            r,
            z,
            mask,
            nu,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_z + j
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n_z, k % self.n_z)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r[i]
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z[j]
    }

    pub fn r_centers(&self) -> &[f64] {
        &self.r
    }

    pub fn z_centers(&self) -> &[f64] {
        &self.z
    }

    /// Cell centre of flat index `k`.
    #[inline]
    pub fn center(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.r[i], self.z[j])
    }

    #[inline]
    pub fn is_active(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn nu_weights(&self) -> &[f64] {
        &self.nu
    }

    #[inline]
    pub fn nu(&self, k: usize) -> f64 {
        self.nu[k]
    }

    /// Whether any cell of the window lies outside the domain.
    pub fn has_mask(&self) -> bool {
        self.mask.iter().any(|m| !m)
    }

    /// Index of the axial mirror image `z -> -z` of cell `k`.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        let (i, j) = self.ij(k);
        self.idx(i, self.n_z - 1 - j)
    }

    /// Total nu-weight of the active cells.
    pub fn active_volume(&self) -> f64 {
        self.nu.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(v, _)| v).sum()
    }

    /// Flat index of the cell containing `(r, z)`, clamped to the window.
    pub fn locate(&self, r: f64, z: f64) -> usize {
        let i = ((r / self.h_r).floor().max(0.0) as usize).min(self.n_r - 1);
        let j = (((z + self.window.z_max) / self.h_z).floor().max(0.0) as usize).min(self.n_z - 1);
        self.idx(i, j)
    }

    /// Largest cell spacing.
    pub fn h_max(&self) -> f64 {
        self.h_r.max(self.h_z)
    }

    /// CSV dump with header `i,j,r,z,mask,nu_weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 48);
        out.push_str("i,j,r,z,mask,nu_weight\n");
        for i in 0..self.n_r {
            for j in 0..self.n_z {
                let k = self.idx(i, j);
                let _ = writeln!(
                    out,
                    "{i},{j},{:.17e},{:.17e},{},{:.17e}",
                    self.r[i],
                    self.z[j],
                    u8::from(self.mask[k]),
                    self.nu[k]
                );
            }
        }
        out
    }
}

/// Nu-measure `sum w_k nu_k` over active cells.
pub fn nu_measure(grid: &Grid, weights: &[f64]) -> f64 {
    assert_eq!(weights.len(), grid.len(), "weights must cover the grid");
    weights
        .iter()
        .enumerate()
        .filter(|&(k, _)| grid.is_active(k))
        .map(|(k, w)| w * grid.nu(k))
        .sum()
}

/// Axisymmetric distance `sup_{(r,z)} sqrt((r - r_ref)^2 + z^2)` from a meridional
/// point set to the circle of radius `r_ref` in the plane `z = 0`.
pub fn dist_to_circle(points: &[(f64, f64)], r_ref: f64) -> Result<f64> {
    if !(r_ref > 0.0) {
        return Err(RingError::InvalidParameter(format!("reference radius must be positive, got {r_ref}")));
    }
    if points.is_empty() {
        return Err(RingError::EmptySet);
    }
    Ok(points
        .iter()
        .map(|&(r, z)| (r - r_ref).hypot(z))
        .fold(0.0, f64::max))
}

/// Centres of the cells whose weight exceeds [`W_MIN`].
pub fn active_points(grid: &Grid, weights: &[f64]) -> Vec<(f64, f64)> {
    weights
        .iter()
        .enumerate()
        .filter(|&(k, &w)| w > W_MIN && grid.is_active(k))
        .map(|(k, _)| grid.center(k))
        .collect()
}

/// Diameter and nu-weighted centroid of the support of `weights`.
pub fn set_geometry(weights: &[f64], grid: &Grid) -> Result<(f64, (f64, f64))> {
    assert_eq!(weights.len(), grid.len(), "weights must cover the grid");
    let points = active_points(grid, weights);
    if points.is_empty() {
        return Err(RingError::EmptyCore);
    }
    let (mut m, mut mr, mut mz) = (0.0, 0.0, 0.0);
    for (k, &w) in weights.iter().enumerate() {
        if w > W_MIN && grid.is_active(k) {
            let (r, z) = grid.center(k);
            let dm = w * grid.nu(k);
            m += dm;
            mr += dm * r;
            mz += dm * z;
        }
    }
    let hull = convex_hull(points);
    let mut diam2: f64 = 0.0;
    for (a, p) in hull.iter().enumerate() {
        for q in &hull[a + 1..] {
            diam2 = diam2.max((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2));
        }
    }
    Ok((diam2.sqrt(), (mr / m, mz / m)))
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect() -> Grid {
        let d = MeridionalDomain::Rectangle { b: 1.0, c: 1.0 };
        Grid::build(d, TruncationBox::bounding(&d).unwrap(), 64, 128).unwrap()
    }

    #[test]
    fn rectangle_volume() {
        let g = rect();
        let v = g.active_volume();
        assert!((v - 2.0 * PI).abs() < 0.05 * 2.0 * PI, "{v}");
        let ones = vec![1.0; g.len()];
        assert!((nu_measure(&g, &ones) - 2.0 * PI).abs() < 1e-9);
        assert_eq!(nu_measure(&g, &vec![0.0; g.len()]), 0.0);
    }

    #[test]
    fn half_slab_measure() {
        let g = rect();
        let w: Vec<f64> = (0..g.len()).map(|k| if g.center(k).0 < 0.5 { 1.0 } else { 0.0 }).collect();
        assert!((nu_measure(&g, &w) - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn exterior_ball_mask() {
        let d = MeridionalDomain::ExteriorBall { d: 1.0 };
        let g = Grid::build(d, TruncationBox::new(4.0, 4.0), 64, 128).unwrap();
        for k in 0..g.len() {
            let (r, z) = g.center(k);
            assert_eq!(g.is_active(k), r * r + z * z > 1.0);
        }
        assert!(g.has_mask());
    }

    #[test]
    fn pipe_staggering() {
        let d = MeridionalDomain::Pipe { d: 1.0 };
        let g = Grid::build(d, TruncationBox::new(1.0, 8.0), 64, 512).unwrap();
        assert!((g.r(0) - 1.0 / 128.0).abs() < 1e-15);
        assert!(!g.has_mask());
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = MeridionalDomain::Pipe { d: 1.0 };
        assert!(Grid::build(d, TruncationBox::new(2.0, 8.0), 64, 64).is_err());
        assert!(Grid::build(d, TruncationBox::new(1.0, 8.0), 8, 64).is_err());
        assert!(Grid::build(MeridionalDomain::Disk { b: -1.0 }, TruncationBox::new(1.0, 1.0), 32, 32).is_err());
        let e = MeridionalDomain::ExteriorBall { d: 1.0 };
        assert!(Grid::build(e, TruncationBox::new(0.5, 4.0), 32, 32).is_err());
        assert!(TruncationBox::new(2.0, 2.0)
            .check_core(&MeridionalDomain::HalfPlane, 1.0)
            .is_err());
        assert!(TruncationBox::new(3.0, 3.0)
            .check_core(&MeridionalDomain::HalfPlane, 1.0)
            .is_ok());
    }

    #[test]
    fn mirror_symmetry() {
        for d in [
            MeridionalDomain::Disk { b: 1.0 },
            MeridionalDomain::ExteriorBall { d: 1.0 },
            MeridionalDomain::HalfPlane,
        ] {
            let w = TruncationBox::bounding(&d).unwrap_or(TruncationBox::new(3.0, 3.0));
            let g = Grid::build(d, w, 32, 48).unwrap();
            for k in 0..g.len() {
                let m = g.mirror(k);
                assert_eq!(g.is_active(k), g.is_active(m));
                assert_eq!(g.nu(k), g.nu(m));
                assert_eq!(g.center(k).1, -g.center(m).1);
            }
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist_to_circle(&[(1.0, 0.0)], 1.0).unwrap(), 0.0);
        assert!((dist_to_circle(&[(1.25, 0.0)], 1.0).unwrap() - 0.25).abs() < 1e-15);
        let d = dist_to_circle(&[(1.0, 0.3), (0.6, 0.0)], 1.0).unwrap();
        assert!((d - 0.4).abs() < 1e-15);
        assert_eq!(dist_to_circle(&[], 1.0), Err(RingError::EmptySet));
    }

    #[test]
    fn geometry_examples() {
        let g = Grid::build(MeridionalDomain::HalfPlane, TruncationBox::new(2.0, 2.0), 32, 64).unwrap();
        let mut w = vec![0.0; g.len()];
        let k = g.locate(1.0, 0.0);
        w[k] = 1.0;
        let (diam, c) = set_geometry(&w, &g).unwrap();
        assert_eq!(diam, 0.0);
        assert_eq!(c, g.center(k));
        let k2 = g.locate(1.0, 0.5);
        w[k2] = 1.0;
        let (diam, _) = set_geometry(&w, &g).unwrap();
        assert!((diam - 0.5).abs() < 1e-12);
        assert_eq!(set_geometry(&vec![0.0; g.len()], &g), Err(RingError::EmptyCore));
    }
}
