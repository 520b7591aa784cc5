//! Scalar grid functions.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use crate::domain::Grid;

/// A cell-centred scalar field on a [`Grid`] (stream function, `Kζ`, pressure, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct StreamField {
    n_r: usize,
    n_z: usize,
    values: Vec<f64>,
}

impl StreamField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            n_r: grid.n_r,
            n_z: grid.n_z,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match the grid");
        Self {
            n_r: grid.n_r,
            n_z: grid.n_z,
            values,
        }
    }

    /// Samples `f(r, z)` at every cell centre, zero outside the domain.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                if grid.is_active(k) {
                    let (r, z) = grid.center(k);
                    f(r, z)
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_r, self.n_z)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Max-norm of the difference over the cells selected by `keep`.
    pub fn max_diff(&self, other: &StreamField, keep: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(k, _)| keep(*k))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV dump with header `i,j,r,z,value`.
    pub fn to_csv(&self, grid: &Grid) -> String {
        let mut out = String::with_capacity(self.len() * 40);
        out.push_str("i,j,r,z,value\n");
        for i in 0..grid.n_r {
            for j in 0..grid.n_z {
                let k = grid.idx(i, j);
                let _ = writeln!(out, "{i},{j},{:.17e},{:.17e},{:.17e}", grid.r(i), grid.z(j), self.values[k]);
            }
        }
        out
    }
}

impl Index<usize> for StreamField {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for StreamField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}
