//! Python bindings. Results cross the boundary as JSON text so the Python
//! side sees exactly what the command-line tool writes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mamnav::behavior::{classify as classify_reading, BehaviorThresholds, ProximityReading};
use mamnav::qp::{QpProblem, QpSettings, QpSolver, QpStatus};
use mamnav::runner::{self, RunOptions, EXIT_RUNTIME};
use mamnav::Error;

fn to_py(e: Error) -> PyErr {
    if runner::exit_code(&e) == EXIT_RUNTIME {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn options(
    mode: Option<&str>,
    seed: Option<u64>,
    overrides: Option<Vec<String>>,
    calibration: Option<String>,
) -> PyResult<RunOptions> {
    Ok(RunOptions {
        mode: mode.map(str::parse).transpose().map_err(to_py)?,
        seed,
        overrides: overrides
            .unwrap_or_default()
            .iter()
            .map(|s| runner::parse_override(s))
            .collect::<Result<_, _>>()
            .map_err(to_py)?,
        calibration: calibration.map(Into::into),
    })
}

/// Runs one episode and returns its summary JSON.
#[pyfunction]
#[pyo3(signature = (scenario, mode=None, seed=None, overrides=None, calibration=None, out=None))]
fn run_episode(
    scenario: &str,
    mode: Option<&str>,
    seed: Option<u64>,
    overrides: Option<Vec<String>>,
    calibration: Option<String>,
    out: Option<&str>,
) -> PyResult<String> {
    let opts = options(mode, seed, overrides, calibration)?;
    let ep = runner::cmd_run(Path::new(scenario), &opts, out.map(Path::new)).map_err(to_py)?;
    ep.summary_json().map_err(to_py)
}

/// Both modes over `repeats` seeds; returns `(report_json, table)`.
#[pyfunction]
#[pyo3(signature = (scenario, repeats=1, seed=None, overrides=None, calibration=None))]
fn compare(
    scenario: &str,
    repeats: usize,
    seed: Option<u64>,
    overrides: Option<Vec<String>>,
    calibration: Option<String>,
) -> PyResult<(String, String)> {
    let opts = options(None, seed, overrides, calibration)?;
    let report = runner::cmd_compare(Path::new(scenario), &opts, repeats).map_err(to_py)?;
    Ok((report.to_json().map_err(to_py)?, report.to_table()))
}

/// Fits gains to a measurements CSV; returns the calibration JSON.
#[pyfunction]
#[pyo3(signature = (scenario, measurements, out=None, seed=None))]
fn calibrate(scenario: &str, measurements: &str, out: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let opts = options(None, seed, None, None)?;
    let cal = runner::cmd_calibrate(Path::new(scenario), Path::new(measurements), &opts, out.map(Path::new))
        .map_err(to_py)?;
    cal.to_json().map_err(to_py)
}

#[pyfunction]
fn validate(scenario: &str) -> PyResult<bool> {
    runner::cmd_validate(Path::new(scenario), &RunOptions::default()).map_err(to_py)?;
    Ok(true)
}

/// Solves `min ½xᵀHx + gᵀx  s.t.  l ≤ Ax ≤ u` with default settings.
/// Returns `(x, status, iterations)`.
#[pyfunction]
fn solve_qp(
    h: Vec<Vec<f64>>,
    g: Vec<f64>,
    a: Vec<Vec<f64>>,
    l: Vec<f64>,
    u: Vec<f64>,
) -> PyResult<(Vec<f64>, String, usize)> {
    let n = g.len();
    let dense = |rows: &[Vec<f64>], cols: usize| -> PyResult<DMatrix<f64>> {
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err(format!("every matrix row must have {cols} entries")));
        }
        Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    };
    let p =
        QpProblem::new(dense(&h, n)?, DVector::from_vec(g), dense(&a, n)?, DVector::from_vec(l), DVector::from_vec(u))
            .map_err(to_py)?;
    let sol = QpSolver::new().solve(&p, &QpSettings::default());
    let status = match sol.status {
        QpStatus::Solved => "solved",
        QpStatus::MaxIterations => "max_iterations",
        QpStatus::PrimalInfeasible => "primal_infeasible",
    };
    Ok((sol.x.iter().copied().collect(), status.to_string(), sol.iterations))
}

/// Frontal mode and side correction for one reading, default thresholds.
#[pyfunction]
fn classify(front: f64, left: f64, right: f64) -> (String, String) {
    let d = classify_reading(&ProximityReading { front, left, right }, &BehaviorThresholds::default());
    (d.frontal_mode.as_str().to_string(), d.side_correction.as_str().to_string())
}

#[pymodule]
fn mamnav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qp, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    Ok(())
}
