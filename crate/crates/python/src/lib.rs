//! Python bindings for `packet_collapse`.
//!
//! Build with `maturin develop -m crates/python/Cargo.toml` or
//! `cargo build -p packet-collapse-py --features extension-module --release`
//! and import as `packet_collapse`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::packet_collapse::collapse::{self, SuperpositionDecomposition};
use ::packet_collapse::config::{parse_config_with, Overrides};
use ::packet_collapse::diagnostics::{self, GateConfig, ObservableSpec, PacketSummary};
use ::packet_collapse::measurement::{self, CouplingConfig, ObjectState};
use ::packet_collapse::propagator::{self, EvolutionConfig};
use ::packet_collapse::{grid, scenario};

create_exception!(packet_collapse, PacketCollapseError, PyException);

fn err(e: ::packet_collapse::Error) -> PyErr {
    PacketCollapseError::new_err(e.to_string())
}

#[pyclass(name = "Grid1D", frozen, from_py_object)]
#[derive(Clone)]
struct PyGrid(grid::Grid1D);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(x_min: f64, x_max: f64, n_points: usize) -> PyResult<Self> {
        grid::Grid1D::new(x_min, x_max, n_points).map(Self).map_err(err)
    }

    #[getter]
    fn x_min(&self) -> f64 {
        self.0.x_min()
    }

    #[getter]
    fn x_max(&self) -> f64 {
        self.0.x_max()
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    fn points(&self) -> Vec<f64> {
        self.0.points().collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid1D({}, {}, {})", self.0.x_min(), self.0.x_max(), self.0.n_points())
    }
}

#[pyclass(name = "PhysicalParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams(grid::PhysicalParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (mass = 1.0, hbar = 1.0))]
    fn new(mass: f64, hbar: f64) -> PyResult<Self> {
        grid::PhysicalParams::new(mass, hbar).map(Self).map_err(err)
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar
    }
}

/// Immutable sampled state; operations return new values.
#[pyclass(name = "WaveFunction", frozen, from_py_object)]
#[derive(Clone)]
struct PyWaveFunction(grid::WaveFunction);

#[pymethods]
impl PyWaveFunction {
    #[staticmethod]
    #[pyo3(signature = (grid, center, sigma, momentum = 0.0, params = None))]
    fn gaussian(grid: &PyGrid, center: f64, sigma: f64, momentum: f64, params: Option<&PyParams>) -> PyResult<Self> {
        let p = params.map(|p| p.0).unwrap_or_default();
        grid::make_gaussian(&grid.0, center, sigma, momentum, &p).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_amplitudes(grid: &PyGrid, amplitudes: Vec<Complex64>) -> PyResult<Self> {
        grid::WaveFunction::from_amplitudes(grid.0, amplitudes).map(Self).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn density(&self) -> Vec<f64> {
        self.0.density()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn normalize(&self) -> PyResult<Self> {
        self.0.normalize().map(Self).map_err(err)
    }

    fn inner(&self, other: &PyWaveFunction) -> PyResult<Complex64> {
        grid::inner_product(&self.0, &other.0).map_err(err)
    }
}

#[pyclass(name = "Potential", frozen, from_py_object)]
#[derive(Clone)]
struct PyPotential(propagator::Potential);

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn free() -> Self {
        Self(propagator::Potential::Free)
    }

    #[staticmethod]
    #[pyo3(signature = (omega, center = 0.0))]
    fn harmonic(omega: f64, center: f64) -> Self {
        Self(propagator::Potential::Harmonic { omega, center })
    }

    #[staticmethod]
    fn double_well(barrier_height: f64, well_separation: f64) -> Self {
        Self(propagator::Potential::DoubleWell { barrier_height, well_separation })
    }

    #[staticmethod]
    fn tabulated(values: Vec<f64>) -> Self {
        Self(propagator::Potential::Tabulated { values })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

fn params_or_default(p: Option<&PyParams>) -> grid::PhysicalParams {
    p.map(|p| p.0).unwrap_or_default()
}

fn gate_from(eta: f64, k: f64, taylor_tol: f64, mass_threshold: f64) -> GateConfig {
    GateConfig { eta, k, taylor_tol, mass_threshold }
}

fn summary_dict<'py>(py: Python<'py>, s: &PacketSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("exp_x", s.exp_x)?;
    d.set_item("std_x", s.std_x)?;
    d.set_item("exp_p", s.exp_p)?;
    d.set_item("std_p", s.std_p)?;
    d.set_item("support", s.support)?;
    d.set_item("mass_in_support", s.mass_in_support)?;
    d.set_item("uncertainty_product", s.uncertainty_product())?;
    Ok(d)
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PacketCollapseError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Evolves `psi` for `n_steps` steps of `dt`; returns the final state.
#[pyfunction]
#[pyo3(signature = (psi, potential, dt, n_steps, params = None))]
fn evolve(
    psi: &PyWaveFunction,
    potential: &PyPotential,
    dt: f64,
    n_steps: usize,
    params: Option<&PyParams>,
) -> PyResult<PyWaveFunction> {
    let cfg = EvolutionConfig { dt, n_steps, record_every: n_steps.max(1) };
    propagator::evolve(&psi.0, &potential.0, &params_or_default(params), &cfg, |_, _| {})
        .map(PyWaveFunction)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (psi, k = 1.0, params = None))]
fn packet_summary<'py>(
    py: Python<'py>,
    psi: &PyWaveFunction,
    k: f64,
    params: Option<&PyParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let gate = GateConfig { k, ..GateConfig::default() };
    let s = diagnostics::packet_summary(&psi.0, &gate, &params_or_default(params)).map_err(err)?;
    summary_dict(py, &s)
}

/// Gate on the position polynomial with the given coefficients (constant first).
#[pyfunction]
#[pyo3(signature = (psi, coefficients, eta = 10.0, k = 1.0, taylor_tol = 0.05, mass_threshold = 0.99, params = None))]
#[allow(clippy::too_many_arguments)]
fn wave_packet_gate(
    py: Python<'_>,
    psi: &PyWaveFunction,
    coefficients: Vec<f64>,
    eta: f64,
    k: f64,
    taylor_tol: f64,
    mass_threshold: f64,
    params: Option<&PyParams>,
) -> PyResult<Py<PyAny>> {
    let a = ObservableSpec::PositionPoly { coefficients };
    let v = diagnostics::wave_packet_gate(
        &psi.0,
        &[a],
        &gate_from(eta, k, taylor_tol, mass_threshold),
        &params_or_default(params),
    )
    .map_err(err)?;
    json_to_py(py, &v)
}

/// p_n for the superposition Σ c_n Ψ_n.
#[pyfunction]
#[pyo3(signature = (coefficients, states, k = 6.0, params = None))]
fn geometric_probabilities(
    coefficients: Vec<Complex64>,
    states: Vec<PyWaveFunction>,
    k: f64,
    params: Option<&PyParams>,
) -> PyResult<Vec<f64>> {
    let gate = GateConfig { k, ..GateConfig::default() };
    let branches = coefficients.into_iter().zip(states.into_iter().map(|s| s.0)).collect();
    let decomp = SuperpositionDecomposition::from_branches(branches, &gate, &params_or_default(params)).map_err(err)?;
    collapse::geometric_probabilities(&decomp).map(|g| g.probabilities).map_err(err)
}

#[pyfunction]
fn sample_index(probabilities: Vec<f64>, seed: u64) -> usize {
    collapse::sample_index(&probabilities, seed)
}

/// Premeasurement, von Neumann coupling and one seeded measurement of a free pointer.
#[pyfunction]
#[pyo3(signature = (coefficients, apparatus, seed, shift_velocity = 1.0, d_sep = 10.0, tau = 12.0, dt = 0.01, k = 6.0, params = None))]
#[allow(clippy::too_many_arguments)]
fn measure(
    py: Python<'_>,
    coefficients: Vec<Complex64>,
    apparatus: &PyWaveFunction,
    seed: u64,
    shift_velocity: f64,
    d_sep: f64,
    tau: f64,
    dt: f64,
    k: f64,
    params: Option<&PyParams>,
) -> PyResult<Py<PyAny>> {
    let params = params_or_default(params);
    let gate = GateConfig { k, ..GateConfig::default() };
    let ready = diagnostics::packet_summary(&apparatus.0, &gate, &params).map_err(err)?;
    let pointer = [ObservableSpec::shifted_position(scenario::pointer_offset(&ready, &gate))];
    let object = ObjectState::new(coefficients).map_err(err)?;
    let start = measurement::premeasurement(&object, &apparatus.0, &pointer, &gate, &params).map_err(err)?;
    let cfg = CouplingConfig { shift_velocity, d_sep, tau };
    let (end, report) = measurement::von_neumann_evolve(
        &start,
        &cfg,
        &propagator::Potential::Free,
        &params,
        dt,
        &gate,
    )
    .map_err(err)?;
    let out = measurement::measure(&end, &report, seed, &gate, &params).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("t_star", report.critical_time)?;
    d.set_item("outcome", out.realized_object_index)?;
    d.set_item("probability", out.event.probability)?;
    d.set_item("object_mixture", out.object_mixture)?;
    d.set_item("apparatus_state", PyWaveFunction(out.apparatus_state))?;
    Ok(d.into_any().unbind())
}

/// Runs a TOML scenario config; returns the manifest as a dict.
#[pyfunction]
#[pyo3(signature = (config_text, out_dir, seed = None, n_runs = None))]
fn run_scenario(
    py: Python<'_>,
    config_text: &str,
    out_dir: PathBuf,
    seed: Option<u64>,
    n_runs: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let cfg = parse_config_with(config_text, Overrides { seed, n_runs }).map_err(err)?;
    let outcome = scenario::run(&cfg, &out_dir).map_err(err)?;
    let manifest = json_to_py(py, &outcome.manifest)?;
    manifest.bind(py).set_item("run_dir", outcome.run_dir.to_string_lossy().into_owned())?;
    Ok(manifest)
}

#[pymodule]
#[pyo3(name = "packet_collapse")]
fn py_packet_collapse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PacketCollapseError", m.py().get_type::<PacketCollapseError>())?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyWaveFunction>()?;
    m.add_class::<PyPotential>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(packet_summary, m)?)?;
    m.add_function(wrap_pyfunction!(wave_packet_gate, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(sample_index, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
