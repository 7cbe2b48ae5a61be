use std::sync::Mutex;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rrbeam::analysis::{check_stability as stability, predict_mse as predict, PredictOptions};
use rrbeam::complexity::complexity_counts as counts;
use rrbeam::config::{AlgorithmKind, ExperimentConfig, ScenarioConfig};
use rrbeam::experiment::{build_beamformer, run_experiment, sweep_rank as sweep};
use rrbeam::fullrank::optimal_full_rank;
use rrbeam::jio::{JioState, SgSteps};
use rrbeam::linalg::CVec;
use rrbeam::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::Plot(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_config(config_json: &str) -> PyResult<ExperimentConfig> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

/// Steering vector of an `elements`-element half-wavelength ULA for an
/// axis-referenced DOA in degrees.
#[pyfunction]
fn steering_vector(theta_deg: f64, elements: usize) -> PyResult<Vec<Complex64>> {
    rrbeam::signal::steering_vector(theta_deg, elements).map(|a| a.iter().copied().collect()).map_err(py_err)
}

/// `(algorithm, additions, multiplications)` per snapshot for every costed algorithm.
#[pyfunction]
fn complexity_counts(m: usize, d: usize) -> PyResult<Vec<(String, u64, u64)>> {
    let rows = counts(m, d).map_err(py_err)?;
    Ok(rows.into_iter().map(|c| (c.algorithm.name().to_owned(), c.additions, c.multiplications)).collect())
}

/// Optimal weights and minimum output variance for a scenario JSON object.
#[pyfunction]
fn optimal_weights(scenario_json: &str) -> PyResult<(Vec<Complex64>, f64)> {
    let sc: ScenarioConfig = parse_json("scenario", scenario_json)?;
    let scenario = sc.to_scenario().map_err(py_err)?;
    let opt = optimal_full_rank(&scenario.true_covariance(), &scenario.soi_steering()).map_err(py_err)?;
    Ok((opt.weights.iter().copied().collect(), opt.min_variance))
}

/// Runs an experiment config and returns `{label: {"sinr_db", "mse", "rank"}}`.
#[pyfunction]
fn run<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config_json)?;
    let res = py.detach(|| run_experiment(&cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    for c in res.curves {
        let entry = PyDict::new(py);
        entry.set_item("sinr_db", c.sinr_db)?;
        entry.set_item("mse", c.mse)?;
        entry.set_item("rank", c.rank)?;
        out.set_item(c.label, entry)?;
    }
    Ok(out)
}

/// `(algorithm, rank, sinr_db, mse)` rows at the final snapshot.
#[pyfunction]
fn sweep_rank(py: Python<'_>, config_json: &str, ranks: Vec<usize>) -> PyResult<Vec<(String, usize, f64, f64)>> {
    let cfg = parse_config(config_json)?;
    let res = py.detach(|| sweep(&cfg, &ranks)).map_err(py_err)?;
    Ok(res.rows.into_iter().map(|r| (r.algorithm, r.rank, r.sinr_db, r.mse)).collect())
}

/// Stability report for a JIO-SG step pair at the standard initialization.
#[pyfunction]
#[pyo3(signature = (config_json, mu_s, mu_w, rank))]
fn stability_check<'py>(py: Python<'py>, config_json: &str, mu_s: f64, mu_w: f64, rank: usize) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config_json)?;
    let scenario = cfg.to_scenario().map_err(py_err)?;
    let state = JioState::initial(scenario.soi_steering(), rank).map_err(py_err)?;
    let report = stability(&scenario, SgSteps { mu_s, mu_w }, &state).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("spectral_radius", report.spectral_radius)?;
    out.set_item("effective_radius", report.effective_radius)?;
    out.set_item("stable", format!("{:?}", report.stable).to_lowercase())?;
    out.set_item("mu_s", report.mu_s)?;
    out.set_item("mu_w", report.mu_w)?;
    Ok(out)
}

/// Semi-analytical JIO-SG MSE trajectory over `steps` snapshots.
#[pyfunction]
#[pyo3(signature = (config_json, mu_s, mu_w, rank, steps, ensemble_size=200, seed=None))]
#[allow(clippy::too_many_arguments)]
fn predict_mse(
    py: Python<'_>,
    config_json: &str,
    mu_s: f64,
    mu_w: f64,
    rank: usize,
    steps: usize,
    ensemble_size: usize,
    seed: Option<u64>,
) -> PyResult<(Vec<f64>, f64)> {
    let cfg = parse_config(config_json)?;
    let scenario = cfg.to_scenario().map_err(py_err)?;
    let mut opts = PredictOptions::new(steps, rank);
    opts.ensemble_size = ensemble_size;
    opts.seed = seed;
    let pred = py.detach(|| predict(&scenario, SgSteps { mu_s, mu_w }, &opts)).map_err(py_err)?;
    Ok((pred.trajectory, pred.eps_min))
}

/// An adaptive beamformer built from an algorithm JSON object such as
/// `{"kind": "jio-rls", "rank": 4}` and a scenario JSON object.
#[pyclass(module = "rrbeam_py")]
struct Beamformer {
    inner: Mutex<Box<dyn rrbeam::Beamformer>>,
    elements: usize,
}

#[pymethods]
impl Beamformer {
    #[new]
    fn new(algorithm_json: &str, scenario_json: &str) -> PyResult<Self> {
        let kind: AlgorithmKind = parse_json("algorithm", algorithm_json)?;
        let sc: ScenarioConfig = parse_json("scenario", scenario_json)?;
        let scenario = sc.to_scenario().map_err(py_err)?;
        kind.validate(scenario.elements, "algorithm").map_err(py_err)?;
        let inner = build_beamformer(&kind, &scenario).map_err(py_err)?;
        Ok(Beamformer { inner: Mutex::new(inner), elements: scenario.elements })
    }

    /// Adapts to one snapshot and returns the array output.
    fn process(&self, snapshot: Vec<Complex64>) -> PyResult<Complex64> {
        if snapshot.len() != self.elements {
            return Err(PyValueError::new_err(format!("snapshot needs {} elements, got {}", self.elements, snapshot.len())));
        }
        let r = CVec::from_vec(snapshot);
        self.lock()?.process(&r).map_err(py_err)
    }

    fn weights(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.lock()?.weights().iter().copied().collect())
    }

    #[getter]
    fn rank(&self) -> PyResult<usize> {
        Ok(self.lock()?.rank())
    }

    #[getter]
    fn elements(&self) -> usize {
        self.elements
    }
}

impl Beamformer {
    fn lock(&self) -> PyResult<std::sync::MutexGuard<'_, Box<dyn rrbeam::Beamformer>>> {
        self.inner.lock().map_err(|_| PyRuntimeError::new_err("beamformer state poisoned by an earlier panic"))
    }
}

#[pymodule]
fn rrbeam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_counts, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_weights, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_rank, m)?)?;
    m.add_function(wrap_pyfunction!(stability_check, m)?)?;
    m.add_function(wrap_pyfunction!(predict_mse, m)?)?;
    m.add_class::<Beamformer>()?;
    Ok(())
}
