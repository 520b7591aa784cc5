//! Python bindings for the vortex-ring laboratory.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use vortex_ring::diagnostics::r_star as core_r_star;
use vortex_ring::greens::{green_sigma_bound as core_sigma_bound, ring_green as core_ring_green, KernelPoint};
use vortex_ring::rearrangement::{quantile_select as core_quantile, steiner_symmetrize as core_steiner};
use vortex_ring::{
    apply_l as core_apply_l, fit_scalings as core_fit, solve_fixed_point as core_solve, solve_k as core_solve_k,
    BackgroundMode, DiagnosticsRecord, FixedPointState, Grid, InitStrategy, MeridionalDomain, RingError, RunParams,
    StreamField, SweepResult, TruncationBox,
};

create_exception!(vortex_ring_py, VortexRingError, PyException);
create_exception!(vortex_ring_py, InfeasibleError, VortexRingError);
create_exception!(vortex_ring_py, SolverFailure, VortexRingError);
create_exception!(vortex_ring_py, InsufficientSweep, VortexRingError);

fn to_py(err: RingError) -> PyErr {
    let msg = err.to_string();
    match err {
        RingError::Infeasible { .. } => InfeasibleError::new_err(msg),
        RingError::SolverFailure { .. } | RingError::NonConvergence { .. } => SolverFailure::new_err(msg),
        RingError::InsufficientSweep(_) => InsufficientSweep::new_err(msg),
        _ => VortexRingError::new_err(msg),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A meridional domain of revolution.
#[pyclass(name = "Domain", frozen, from_py_object)]
#[derive(Clone)]
struct PyDomain(MeridionalDomain);

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn half_plane() -> Self {
        Self(MeridionalDomain::HalfPlane)
    }

    #[staticmethod]
    fn pipe(d: f64) -> PyResult<Self> {
        Self::checked(MeridionalDomain::Pipe { d })
    }

    #[staticmethod]
    fn exterior_ball(d: f64) -> PyResult<Self> {
        Self::checked(MeridionalDomain::ExteriorBall { d })
    }

    #[staticmethod]
    fn disk(b: f64) -> PyResult<Self> {
        Self::checked(MeridionalDomain::Disk { b })
    }

    #[staticmethod]
    fn rectangle(b: f64, c: f64) -> PyResult<Self> {
        Self::checked(MeridionalDomain::Rectangle { b, c })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    /// Volume `ν(D)` for bounded domains, else `None`.
    fn volume(&self) -> Option<f64> {
        self.0.volume()
    }

    /// Circle radius on which cores concentrate for background parameter `w`.
    fn r_star(&self, w: f64) -> PyResult<f64> {
        core_r_star(&self.0, w).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?})", self.0)
    }
}

impl PyDomain {
    fn checked(d: MeridionalDomain) -> PyResult<Self> {
        d.validate().map_err(to_py)?;
        Ok(Self(d))
    }
}

/// Uniform cell-centred grid on a truncation window `(0, r_max) x (-z_max, z_max)`.
#[pyclass(name = "Grid", frozen)]
struct PyGrid(Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(domain: PyDomain, r_max: f64, z_max: f64, n_r: usize, n_z: usize) -> PyResult<Self> {
        Grid::build(domain.0, TruncationBox::new(r_max, z_max), n_r, n_z).map(Self).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.n_r, self.0.n_z)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64) {
        (self.0.h_r, self.0.h_z)
    }

    /// Cell centres as two flat lists in storage order (`k = i * n_z + j`).
    fn centers(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.0.len()).map(|k| self.0.center(k)).unzip()
    }

    /// `ν` measure of every cell, zero outside the domain.
    fn nu(&self) -> Vec<f64> {
        self.0.nu_weights().to_vec()
    }

    fn mask(&self) -> Vec<bool> {
        self.0.mask().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

impl PyGrid {
    fn check_len(&self, v: &[f64], name: &str) -> PyResult<()> {
        if v.len() == self.0.len() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("{name} has {} values, grid has {}", v.len(), self.0.len())))
        }
    }
}

/// Parameters of one fixed-point run.
#[pyclass(name = "RunParams")]
struct PyRunParams(RunParams);

#[pymethods]
impl PyRunParams {
    #[new]
    #[pyo3(signature = (domain, lam, w, n_r, n_z, window = None, init = "scan", seed = 0, init_r = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        domain: PyDomain,
        lam: f64,
        w: f64,
        n_r: usize,
        n_z: usize,
        window: Option<(f64, f64)>,
        init: &str,
        seed: u64,
        init_r: Option<f64>,
    ) -> PyResult<Self> {
        let mut p = RunParams::new(domain.0, lam, w, n_r, n_z).map_err(to_py)?;
        if let Some((r, z)) = window {
            p.window = TruncationBox::new(r, z);
        }
        p.init = match init {
            "scan" => InitStrategy::Scan,
            "annulus" => InitStrategy::Annulus { r: init_r },
            "random" => InitStrategy::Random { seed },
            other => return Err(PyValueError::new_err(format!("unknown init {other:?}"))),
        };
        Ok(Self(p))
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn window(&self) -> (f64, f64) {
        (self.0.window.r_max, self.0.window.z_max)
    }

    #[getter]
    fn background(&self) -> &'static str {
        self.0.background.name()
    }

    #[setter]
    fn set_background(&mut self, mode: &str) -> PyResult<()> {
        self.0.background = match mode {
            "scaled_uniform" => BackgroundMode::ScaledUniform,
            "fixed_uniform" => BackgroundMode::FixedUniform,
            "none" => BackgroundMode::None,
            "exterior_ball_scaled" => BackgroundMode::ExteriorBallScaled,
            other => return Err(PyValueError::new_err(format!("unknown background {other:?}"))),
        };
        Ok(())
    }

    #[getter]
    fn max_iters(&self) -> usize {
        self.0.tolerances.max_iters
    }

    #[setter]
    fn set_max_iters(&mut self, n: usize) {
        self.0.tolerances.max_iters = n;
    }

    fn grid(&self) -> PyResult<PyGrid> {
        self.0.grid().map(PyGrid).map_err(to_py)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0)
    }
}

/// Converged state: weights, induced stream function, multiplier and energy history.
#[pyclass(name = "FixedPointState", frozen)]
struct PyState(FixedPointState);

#[pymethods]
impl PyState {
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.zeta.weights.clone()
    }

    #[getter]
    fn zeta(&self) -> Vec<f64> {
        self.0.zeta.values()
    }

    #[getter]
    fn psi_induced(&self) -> Vec<f64> {
        self.0.psi_induced.values().to_vec()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy()
    }

    #[getter]
    fn energy_history(&self) -> Vec<f64> {
        self.0.energy_history.clone()
    }
}

/// Runs the rearrangement ascent to a fixed point; returns the state and a diagnostics dict.
#[pyfunction]
fn solve_fixed_point<'py>(py: Python<'py>, params: &PyRunParams) -> PyResult<(PyState, Bound<'py, PyAny>)> {
    let p = params.0.clone();
    let (state, record) = py.detach(|| core_solve(&p)).map_err(to_py)?;
    Ok((PyState(state), json_to_py(py, &record)?))
}

/// Fits the scaling laws on a list of diagnostics dicts from `solve_fixed_point`.
#[pyfunction]
fn fit_scalings<'py>(
    py: Python<'py>,
    records: Vec<Bound<'py, PyAny>>,
    domain: PyDomain,
    w: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<DiagnosticsRecord> = records.iter().map(py_to_json).collect::<PyResult<_>>()?;
    let sweep = SweepResult {
        domain: domain.0,
        w,
        background: BackgroundMode::default_for(&domain.0),
        records,
        failures: Vec::new(),
    };
    let report = core_fit(&sweep, &domain.0, w).map_err(to_py)?;
    json_to_py(py, &report)
}

/// `K ζ`: the induced stream function of a vorticity field on `grid`.
#[pyfunction]
fn solve_k(zeta: Vec<f64>, grid: &PyGrid) -> PyResult<Vec<f64>> {
    grid.check_len(&zeta, "zeta")?;
    core_solve_k(&zeta, &grid.0, &grid.0.domain).map(StreamField::into_values).map_err(to_py)
}

/// The discrete operator `𝓛ψ`.
#[pyfunction]
fn apply_l(psi: Vec<f64>, grid: &PyGrid) -> PyResult<Vec<f64>> {
    grid.check_len(&psi, "psi")?;
    Ok(core_apply_l(&StreamField::from_values(&grid.0, psi), &grid.0).into_values())
}

/// Green's function of the axisymmetric operator between rings `(r, z)` and `(r2, z2)`.
#[pyfunction]
fn ring_green(r: f64, z: f64, r2: f64, z2: f64) -> PyResult<f64> {
    core_ring_green(KernelPoint::new(r, z), KernelPoint::new(r2, z2)).map_err(to_py)
}

/// The σ estimate `sqrt(r r') / (8π²) asinh(1/σ)`.
#[pyfunction]
fn green_sigma_bound(r: f64, z: f64, r2: f64, z2: f64) -> f64 {
    core_sigma_bound(KernelPoint::new(r, z), KernelPoint::new(r2, z2))
}

/// Weights in [0, 1] on the largest values of `phi` with `λ ν`-mass one, and the threshold.
#[pyfunction]
fn quantile_select(phi: Vec<f64>, grid: &PyGrid, lam: f64) -> PyResult<(Vec<f64>, f64)> {
    grid.check_len(&phi, "phi")?;
    core_quantile(&phi, &grid.0, lam).map_err(to_py)
}

/// Column-wise symmetric decreasing rearrangement about `z = 0`.
#[pyfunction]
fn steiner_symmetrize(weights: Vec<f64>, grid: &PyGrid) -> PyResult<Vec<f64>> {
    grid.check_len(&weights, "weights")?;
    Ok(core_steiner(&weights, &grid.0))
}

#[pymodule]
fn vortex_ring_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyDomain>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyRunParams>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(solve_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scalings, m)?)?;
    m.add_function(wrap_pyfunction!(solve_k, m)?)?;
    m.add_function(wrap_pyfunction!(apply_l, m)?)?;
    m.add_function(wrap_pyfunction!(ring_green, m)?)?;
    m.add_function(wrap_pyfunction!(green_sigma_bound, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_select, m)?)?;
    m.add_function(wrap_pyfunction!(steiner_symmetrize, m)?)?;
    m.add("VortexRingError", py.get_type::<VortexRingError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add("SolverFailure", py.get_type::<SolverFailure>())?;
    m.add("InsufficientSweep", py.get_type::<InsufficientSweep>())?;
    Ok(())
}
