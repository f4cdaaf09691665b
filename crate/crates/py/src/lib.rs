//! Python bindings for the `papc` crate.
//!
//! Vectors are lists of Python `complex`, matrices are lists of rows.
//! Library errors surface as `ValueError`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use papc_core::channel_sim::{self, ScenarioConfig};
use papc_core::geometry;
use papc_core::linalg::ComplexMatrix;
use papc_core::multicarrier::{self, CyclicOptions, DualOptions, MultiCarrierLink};
use papc_core::single_carrier::{self, GaussSeidelOptions, LinkInstance};
use papc_core::{DiagonalNoise, PapcError};

fn err(e: PapcError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    ComplexMatrix::from_rows(r, c, rows.into_iter().flatten().collect()).map_err(err)
}

fn rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Per-antenna power budgets in watts.
#[pyclass(name = "PowerConstraints", module = "papc", frozen, from_py_object)]
#[derive(Clone)]
struct PyPowerConstraints(geometry::PowerConstraints);

#[pymethods]
impl PyPowerConstraints {
    #[new]
    fn new(p: Vec<f64>) -> PyResult<Self> {
        geometry::PowerConstraints::new(p).map(Self).map_err(err)
    }

    #[staticmethod]
    fn uniform(n: usize, p: f64) -> PyResult<Self> {
        geometry::PowerConstraints::uniform(n, p)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn budgets(&self) -> Vec<f64> {
        self.0.budgets().to_vec()
    }

    #[getter]
    fn total(&self) -> f64 {
        self.0.total()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("PowerConstraints({:?})", self.0.budgets())
    }
}

#[pyfunction]
fn p_projection(x: Vec<Complex64>, pc: &PyPowerConstraints) -> PyResult<Vec<Complex64>> {
    geometry::p_projection(&x, &pc.0).map_err(err)
}

#[pyfunction]
fn p_norm(x: Vec<Complex64>, pc: &PyPowerConstraints) -> PyResult<f64> {
    geometry::p_norm(&x, &pc.0).map_err(err)
}

#[pyfunction]
fn qcqp_objective(z: Vec<Complex64>, g: Vec<Complex64>) -> PyResult<f64> {
    if z.len() != g.len() {
        return Err(PyValueError::new_err("z and g differ in length"));
    }
    Ok(single_carrier::qcqp_objective(&z, &g))
}

fn link(h: Vec<Vec<Complex64>>, noise: Vec<f64>, pc: &PyPowerConstraints) -> PyResult<LinkInstance> {
    let noise = DiagonalNoise::new(noise).map_err(err)?;
    LinkInstance::new(matrix(h)?, noise, pc.0.clone()).map_err(err)
}

/// MSE `|w^H H z - 1|^2 + w^H R w` of a single-carrier link.
#[pyfunction]
fn mse(
    z: Vec<Complex64>,
    w: Vec<Complex64>,
    h: Vec<Vec<Complex64>>,
    noise: Vec<f64>,
    pc: &PyPowerConstraints,
) -> PyResult<f64> {
    single_carrier::mse(&z, &w, &link(h, noise, pc)?).map_err(err)
}

#[pyfunction]
fn mmse_combiner(
    z: Vec<Complex64>,
    h: Vec<Vec<Complex64>>,
    noise: Vec<f64>,
    pc: &PyPowerConstraints,
) -> PyResult<Vec<Complex64>> {
    single_carrier::mmse_combiner(&z, &link(h, noise, pc)?).map_err(err)
}

/// Optimal precoder for a fixed effective channel `g`; returns `{z, lambda, case}`.
#[pyfunction]
fn papc_mmse_precoder<'py>(
    py: Python<'py>,
    g: Vec<Complex64>,
    pc: &PyPowerConstraints,
) -> PyResult<Bound<'py, PyDict>> {
    let sol = single_carrier::papc_mmse_precoder(&g, &pc.0).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("z", sol.z)?;
    d.set_item("lambda", sol.lambda)?;
    d.set_item("case", format!("{:?}", sol.case))?;
    Ok(d)
}

#[pyfunction]
fn shadow_prices(g: Vec<Complex64>, pc: &PyPowerConstraints) -> PyResult<Vec<f64>> {
    single_carrier::shadow_prices(&g, &pc.0).map_err(err)
}

/// Alternating single-carrier MMSE design; returns `{z, w, mse, trace, iterations, converged}`.
#[pyfunction]
#[pyo3(signature = (h, noise, pc, max_iter = 500, tol = 1e-10))]
fn gauss_seidel_mmse<'py>(
    py: Python<'py>,
    h: Vec<Vec<Complex64>>,
    noise: Vec<f64>,
    pc: &PyPowerConstraints,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let res = single_carrier::gauss_seidel_mmse(&link(h, noise, pc)?, &GaussSeidelOptions { max_iter, tol })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("z", res.z)?;
    d.set_item("w", res.w)?;
    d.set_item("mse", res.objective)?;
    d.set_item("trace", res.trace)?;
    d.set_item("iterations", res.iterations)?;
    d.set_item("converged", res.converged)?;
    Ok(d)
}

/// Cyclic multicarrier design over per-carrier channels `channels[k]` (m x n).
#[pyfunction]
#[pyo3(signature = (channels, noise, pc, max_cyclic_iterations = 20, max_dual_iterations = 200))]
fn cyclic_multicarrier<'py>(
    py: Python<'py>,
    channels: Vec<Vec<Vec<Complex64>>>,
    noise: Vec<f64>,
    pc: &PyPowerConstraints,
    max_cyclic_iterations: usize,
    max_dual_iterations: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let hs = channels.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
    let noise = DiagonalNoise::new(noise).map_err(err)?;
    let mc = MultiCarrierLink::new(hs, noise, pc.0.clone()).map_err(err)?;
    let opts = CyclicOptions {
        max_cyclic_iterations,
        dual: DualOptions {
            max_dual_iterations,
            ..DualOptions::default()
        },
    };
    let sol = multicarrier::cyclic_multicarrier(&mc, &opts).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("z", sol.z)?;
    d.set_item("w", sol.w)?;
    d.set_item("sum_mse", sol.sum_mse)?;
    d.set_item("per_carrier_mse", sol.per_carrier_mse)?;
    d.set_item("sum_mse_trace", sol.sum_mse_trace)?;
    d.set_item("dual_gap", sol.dual_gap)?;
    Ok(d)
}

fn config(json: Option<&str>) -> PyResult<ScenarioConfig> {
    match json {
        Some(text) => ScenarioConfig::from_json(text).map_err(err),
        None => Ok(ScenarioConfig::default()),
    }
}

/// Default scenario configuration as a JSON string.
#[pyfunction]
fn default_config() -> String {
    serde_json::to_string_pretty(&ScenarioConfig::default()).expect("config is plain data")
}

/// Channels, noise variances and budgets of one trial.
#[pyfunction]
#[pyo3(signature = (trial, config_json = None))]
fn trial_link<'py>(
    py: Python<'py>,
    trial: u64,
    config_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mc = channel_sim::trial_link(&config(config_json)?, trial).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("channels", mc.channels.iter().map(rows).collect::<Vec<_>>())?;
    d.set_item("noise", mc.noise.variances().to_vec())?;
    d.set_item("budgets", mc.pc.budgets().to_vec())?;
    Ok(d)
}

/// Per-method outcome of one trial as a JSON string.
#[pyfunction]
#[pyo3(signature = (trial, config_json = None))]
fn run_trial(trial: u64, config_json: Option<&str>) -> PyResult<String> {
    let res = channel_sim::run_trial(&config(config_json)?, trial).map_err(err)?;
    Ok(serde_json::to_string(&res).expect("trial result is plain data"))
}

/// Full Monte-Carlo run; returns the summary document as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn monte_carlo(py: Python<'_>, config_json: Option<&str>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let rs = py
        .detach(|| channel_sim::monte_carlo(&cfg))
        .map_err(err)?;
    Ok(papc_core::report::summary_json(&rs))
}

#[pymodule]
#[pyo3(name = "papc")]
fn papc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPowerConstraints>()?;
    m.add_function(wrap_pyfunction!(p_projection, m)?)?;
    m.add_function(wrap_pyfunction!(p_norm, m)?)?;
    m.add_function(wrap_pyfunction!(qcqp_objective, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mmse_combiner, m)?)?;
    m.add_function(wrap_pyfunction!(papc_mmse_precoder, m)?)?;
    m.add_function(wrap_pyfunction!(shadow_prices, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_seidel_mmse, m)?)?;
    m.add_function(wrap_pyfunction!(cyclic_multicarrier, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(trial_link, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    Ok(())
}
