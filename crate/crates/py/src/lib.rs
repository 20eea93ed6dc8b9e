//! Python bindings for the bofprior library.
//!
//! Exposes the main operations — synthetic data generation, prior extraction,
//! the trend-window theory helpers, Monte Carlo bound verification, and the
//! four-variant training comparison. Structured results (prior configurations,
//! bound matrices, training reports) cross the boundary as JSON strings, which
//! keeps the Python surface identical to the CLI's on-disk artifacts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bofprior::dataset::{generate_synthetic, TimeGrid, TimeSeries, TimeSeriesDataset};
use bofprior::error::Error;
use bofprior::model::{build_model, InitVariant, DEFAULT_HIDDEN};
use bofprior::priors::{config_from_json, config_to_json, derive_config};
use bofprior::train::{run_comparison, TrainConfig};
use bofprior::trend;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Format { .. } | Error::Parse(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Wrap raw series values into a dataset on the standard periodic unit grid.
fn dataset_from_values(values: Vec<Vec<f64>>) -> PyResult<TimeSeriesDataset> {
    if values.is_empty() {
        return Err(PyValueError::new_err("values must contain at least one series"));
    }
    let t = values[0].len();
    let grid = TimeGrid::regular(t, Some(1.0)).map_err(to_py_err)?;
    let series = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| TimeSeries {
            id: format!("s{i}"),
            values: v,
        })
        .collect();
    let ds = TimeSeriesDataset {
        grid,
        series,
        ground_truth: None,
        seed: None,
    };
    Ok(ds)
}

/// Generate the synthetic benchmark dataset; returns a list of series, each a
/// list of float samples on the periodic unit grid.
#[pyfunction]
#[pyo3(signature = (n_series, n_samples, seed = 7, noise_std = 0.01))]
fn generate(
    n_series: usize,
    n_samples: usize,
    seed: u64,
    noise_std: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let ds = generate_synthetic(n_series, n_samples, seed, noise_std).map_err(to_py_err)?;
    Ok(ds.series.into_iter().map(|s| s.values).collect())
}

/// Extract spectral and trend priors from raw series values; returns the
/// prior configuration as a JSON string (same schema the CLI writes).
#[pyfunction]
#[pyo3(signature = (values, tau = 0.2, delta = 0.1, alpha = 0.05))]
fn analyze(values: Vec<Vec<f64>>, tau: f64, delta: f64, alpha: f64) -> PyResult<String> {
    let ds = dataset_from_values(values)?;
    let config = derive_config(&ds, tau, delta, alpha).map_err(to_py_err)?;
    Ok(config_to_json(&config))
}

/// Closed-form centered sum of squares `n(n²−1)/12` for unit-spaced indices.
#[pyfunction]
fn sxx(n: usize) -> PyResult<f64> {
    trend::sxx(n).map_err(to_py_err)
}

/// Theoretical slope tail bound `min(1, 2·exp(−δ²·S_xx/(2σ²)))`.
#[pyfunction]
fn concentration_bound(delta: f64, s_xx: f64, sigma2: f64) -> f64 {
    trend::concentration_bound(delta, s_xx, sigma2)
}

/// Minimal equidistant window length for slope accuracy δ at confidence 1−α.
#[pyfunction]
fn min_window(sigma: f64, delta: f64, alpha: f64) -> PyResult<usize> {
    trend::min_window(sigma, delta, alpha).map_err(to_py_err)
}

/// Monte Carlo verification of the slope bound over the default
/// (n, σ, δ) matrix; returns the cell list as a JSON string.
#[pyfunction]
#[pyo3(signature = (trials = 10_000, seed = 0))]
fn verify_bounds(trials: usize, seed: u64) -> PyResult<String> {
    let cells = trend::verify_bounds_matrix(
        &trend::DEFAULT_MC_NS,
        &trend::DEFAULT_MC_SIGMAS,
        &trend::DEFAULT_MC_DELTAS,
        trials,
        seed,
    )
    .map_err(to_py_err)?;
    serde_json::to_string_pretty(&cells).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Trainable parameter count of one model variant ("BoF", "H-BoF", "I-BoF"
/// or "IT-BoF") for series of length `n_samples`. Informed variants need the
/// prior configuration JSON from `analyze`.
#[pyfunction]
#[pyo3(signature = (variant, n_samples, config_json = None))]
fn param_count(variant: &str, n_samples: usize, config_json: Option<&str>) -> PyResult<usize> {
    let variant = InitVariant::from_label(variant).map_err(to_py_err)?;
    let config = config_json
        .map(|j| config_from_json(j).map(|(c, _)| c))
        .transpose()
        .map_err(to_py_err)?;
    let model = build_model(config.as_ref(), variant, n_samples, &DEFAULT_HIDDEN, 0)
        .map_err(to_py_err)?;
    Ok(model.param_count())
}

/// Train all four initialization variants on the given series and return the
/// comparison report as a JSON string (same schema as `bof compare`).
#[pyfunction]
#[pyo3(signature = (values, config_json, trials = 3, max_epochs = 10, seed = 0,
                    learning_rate = 1e-3, batch_size = 16, patience = 10))]
#[allow(clippy::too_many_arguments)]
fn compare(
    values: Vec<Vec<f64>>,
    config_json: &str,
    trials: usize,
    max_epochs: usize,
    seed: u64,
    learning_rate: f64,
    batch_size: usize,
    patience: usize,
) -> PyResult<String> {
    let ds = dataset_from_values(values)?;
    let (config, _) = config_from_json(config_json).map_err(to_py_err)?;
    let tc = TrainConfig {
        learning_rate,
        batch_size,
        max_epochs,
        patience,
        seed,
        trials,
        ..TrainConfig::default()
    };
    let report = run_comparison(&ds, &config, &tc).map_err(to_py_err)?;
    Ok(report.to_json())
}

#[pymodule]
fn bofprior_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(sxx, m)?)?;
    m.add_function(wrap_pyfunction!(concentration_bound, m)?)?;
    m.add_function(wrap_pyfunction!(min_window, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add("VARIANTS", vec!["BoF", "H-BoF", "I-BoF", "IT-BoF"])?;
    Ok(())
}
