//! Python module `coalsim`: samplers, closed-form laws and experiment runs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use coalsim_core::branchkit::{self, BesqParams, FellerParams};
use coalsim_core::closedform::QuadratureSpec;
use coalsim_core::contcoal::coalescing_pair_exact;
use coalsim_core::harness::{self, ExperimentConfig, ExperimentKind, Formula};
use coalsim_core::randkit::RngStream;
use coalsim_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

#[pyfunction]
fn feller_extinction(x: f64, t: f64, gamma: f64) -> f64 {
    branchkit::feller_extinction(x, t, gamma)
}

#[pyfunction]
fn feller_laplace(lam: f64, x: f64, t: f64, gamma: f64) -> PyResult<f64> {
    branchkit::feller_laplace(lam, x, t, gamma).map_err(py_err)
}

#[pyfunction]
fn besq_laplace(lam: f64, x: f64, t: f64, delta: f64) -> PyResult<f64> {
    branchkit::besq_laplace(lam, x, t, delta).map_err(py_err)
}

/// `n` independent draws of the Feller diffusion at time `t` from `x`.
#[pyfunction]
#[pyo3(signature = (x, t, gamma, n, seed = 1))]
fn feller_sample(x: f64, t: f64, gamma: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let p = FellerParams::new(gamma).map_err(py_err)?;
    let mut rng = RngStream::new(seed, 0);
    (0..n).map(|_| branchkit::feller_transition(x, t, p, &mut rng).map_err(py_err)).collect()
}

#[pyfunction]
#[pyo3(signature = (x, t, delta, n, seed = 1))]
fn besq_sample(x: f64, t: f64, delta: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let p = BesqParams::new(delta).map_err(py_err)?;
    let mut rng = RngStream::new(seed, 0);
    (0..n).map(|_| branchkit::besq_transition(x, t, p, &mut rng).map_err(py_err)).collect()
}

/// `n` draws of a coalescing Brownian pair from `(a, b)`: `(y1, y2, coalesced)`.
#[pyfunction]
#[pyo3(signature = (a, b, t, n, seed = 1))]
fn coalescing_pair(a: f64, b: f64, t: f64, n: usize, seed: u64) -> PyResult<Vec<(f64, f64, bool)>> {
    let mut rng = RngStream::new(seed, 0);
    (0..n)
        .map(|_| {
            let s = coalescing_pair_exact(a, b, t, &mut rng).map_err(py_err)?;
            Ok((s.y1, s.y2, s.coalesced))
        })
        .collect()
}

/// Evaluates a closed-form law given as a dict like
/// `{"name": "t_extinction_cdf", "zbar": 1, "gamma": 1, "t": 1}`; returns `(value, error)`.
#[pyfunction]
#[pyo3(signature = (formula, quadrature = None))]
fn closed_form(formula: &Bound<'_, PyAny>, quadrature: Option<&Bound<'_, PyAny>>) -> PyResult<(f64, f64)> {
    let f: Formula = serde_json::from_str(&to_json(formula)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let q: QuadratureSpec = match quadrature {
        Some(q) => serde_json::from_str(&to_json(q)?).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => QuadratureSpec::default(),
    };
    let v = harness::evaluate_formula(&f, &q).map_err(py_err)?;
    Ok((v.value, v.error))
}

/// Runs one experiment from a config dict (the same document the CLI reads) and
/// returns its comparison rows as dicts.
#[pyfunction]
#[pyo3(signature = (kind, config, seed = None, replicates = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    config: &Bound<'py, PyAny>,
    seed: Option<u64>,
    replicates: Option<u64>,
) -> PyResult<Bound<'py, PyList>> {
    let kind: ExperimentKind = kind.parse().map_err(py_err)?;
    let mut cfg = ExperimentConfig::from_json(Some(kind), &to_json(config)?).map_err(py_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = replicates {
        if n < 2 {
            return Err(PyValueError::new_err("replicates must be >= 2"));
        }
        cfg.replicates = n;
    }
    let report = py.allow_threads(|| harness::run(&cfg)).map_err(py_err)?;
    let rows = PyList::empty(py);
    for r in report.rows {
        let d = PyDict::new(py);
        d.set_item("experiment", r.experiment)?;
        d.set_item("comparison", r.comparison)?;
        d.set_item("estimate_a", r.estimate_a)?;
        d.set_item("se_a", r.se_a)?;
        d.set_item("estimate_b", r.estimate_b)?;
        d.set_item("se_b", r.se_b)?;
        d.set_item("statistic", r.statistic)?;
        d.set_item("threshold", r.threshold)?;
        d.set_item("pass", r.pass)?;
        d.set_item("seconds", r.seconds)?;
        rows.append(d)?;
    }
    Ok(rows)
}

#[pymodule]
fn coalsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(feller_extinction, m)?)?;
    m.add_function(wrap_pyfunction!(feller_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(besq_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(feller_sample, m)?)?;
    m.add_function(wrap_pyfunction!(besq_sample, m)?)?;
    m.add_function(wrap_pyfunction!(coalescing_pair, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
