//! OLS trend fitting on deseasonalized residuals, finite-sample slope
//! guarantees, and the minimum-window rule that sizes the trend encoder.
//!
//! For equidistant indices `t_i = i` the design spread has the closed form
//! `S_xx = n(n²−1)/12`, the slope estimator concentrates as
//! `P(|b̂−b| > δ) ≤ 2·exp(−δ²·S_xx/(2σ²))` under sub-Gaussian noise, and the
//! induced sample-size rule is `n ≥ (24σ²·ln(2/α)/δ²)^{1/3}`.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::spectral::{deseasonalize, per_series_mode_params, SpectralReport};

/// Ordinary least squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    /// Centered sum of squares of the positions.
    pub s_xx: f64,
    /// Unbiased residual std (divisor n−2; zero when n = 2).
    pub residual_std: f64,
    pub n: usize,
}

/// `S_xx = n(n²−1)/12` for equidistant integer positions.
pub fn sxx(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("sxx needs n >= 2, got {n}")));
    }
    let n = n as f64;
    Ok(n * (n * n - 1.0) / 12.0)
}

/// Fit `y = a + b·t` by least squares.
pub fn ols_fit(values: &[f64], positions: &[f64]) -> Result<OlsFit> {
    let n = values.len();
    if n < 2 || positions.len() != n {
        return Err(Error::InvalidArgument(format!(
            "ols_fit needs >= 2 equal-length inputs, got {} values and {} positions",
            n,
            positions.len()
        )));
    }
    let t_bar = positions.iter().sum::<f64>() / n as f64;
    let y_bar = values.iter().sum::<f64>() / n as f64;
    let s_xx: f64 = positions.iter().map(|&t| (t - t_bar) * (t - t_bar)).sum();
    if s_xx <= 0.0 {
        return Err(Error::SingularDesign(
            "positions are all equal; slope is unidentifiable".into(),
        ));
    }
    let s_xy: f64 = positions
        .iter()
        .zip(values)
        .map(|(&t, &y)| (t - t_bar) * y)
        .sum();
    let slope = s_xy / s_xx;
    let intercept = y_bar - slope * t_bar;
    let residual_std = if n == 2 {
        0.0
    } else {
        let rss: f64 = positions
            .iter()
            .zip(values)
            .map(|(&t, &y)| {
                let r = y - intercept - slope * t;
                r * r
            })
            .sum();
        (rss / (n - 2) as f64).sqrt()
    };
    Ok(OlsFit {
        slope,
        intercept,
        s_xx,
        residual_std,
        n,
    })
}

/// `Var(b̂) = σ²/S_xx`.
pub fn slope_variance(sigma2: f64, s_xx: f64) -> f64 {
    sigma2 / s_xx
}

/// `Var(â) = σ²(1/n + t̄²/S_xx)`.
pub fn bias_variance(sigma2: f64, n: usize, t_bar: f64, s_xx: f64) -> f64 {
    sigma2 * (1.0 / n as f64 + t_bar * t_bar / s_xx)
}

/// Sub-Gaussian tail bound `min(1, 2·exp(−δ²·S_xx/(2σ²)))`.
pub fn concentration_bound(delta: f64, s_xx: f64, sigma2: f64) -> f64 {
    (2.0 * (-delta * delta * s_xx / (2.0 * sigma2)).exp()).min(1.0)
}

/// Minimal equidistant window length guaranteeing `|b̂−b| ≤ δ` with
/// probability `1−α`: `max(2, ⌈(24σ²·ln(2/α)/δ²)^{1/3}⌉)`.
pub fn min_window(sigma: f64, delta: f64, alpha: f64) -> Result<usize> {
    if sigma <= 0.0 || delta <= 0.0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "min_window needs sigma > 0, delta > 0, alpha in (0,1); got ({sigma}, {delta}, {alpha})"
        )));
    }
    let raw = (24.0 * sigma * sigma * (2.0 / alpha).ln() / (delta * delta)).cbrt();
    Ok((raw.ceil() as usize).max(2))
}

/// Equidistant subsample `round(j·(T−1)/(n_opt−1))` for `j = 0..n_opt`,
/// always including both endpoints.
pub fn select_equidistant_indices(t: usize, n_opt: usize) -> Result<Vec<usize>> {
    if n_opt < 2 || n_opt > t {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= n_opt <= T, got n_opt={n_opt}, T={t}"
        )));
    }
    let mut indices: Vec<usize> = (0..n_opt)
        .map(|j| ((j as f64 * (t - 1) as f64) / (n_opt - 1) as f64).round() as usize)
        .collect();
    indices.dedup();
    Ok(indices)
}

/// Dataset-level trend analysis result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendReport {
    /// Mean of per-series residual stds after deseasonalization and OLS.
    pub sigma_eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub n_opt: usize,
    pub indices: Vec<usize>,
}

impl TrendReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Deseasonalize every series, fit each full-length residual on the index
/// scale, and derive the minimal trend window. The per-series fits are
/// returned alongside for prior aggregation (slopes are per index step).
pub fn trend_report(
    dataset: &TimeSeriesDataset,
    spectral: &SpectralReport,
    delta: f64,
    alpha: f64,
) -> Result<(TrendReport, Vec<OlsFit>)> {
    if delta <= 0.0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "trend_report needs delta > 0 and alpha in (0,1); got ({delta}, {alpha})"
        )));
    }
    let t = dataset.n_samples();
    let positions: Vec<f64> = (0..t).map(|i| i as f64).collect();
    let params = if spectral.modes.is_empty() {
        None
    } else {
        Some(match &spectral.per_series_params {
            Some(p) => p.clone(),
            None => per_series_mode_params(dataset, &spectral.modes)?,
        })
    };
    let fits: Vec<OlsFit> = dataset
        .series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let residual = match &params {
                Some(p) => deseasonalize(&s.values, &p[i], &dataset.grid),
                None => s.values.clone(),
            };
            ols_fit(&residual, &positions)
        })
        .collect::<Result<_>>()?;
    let sigma_eps = fits.iter().map(|f| f.residual_std).sum::<f64>() / fits.len() as f64;
    let n_opt = if sigma_eps > 0.0 {
        min_window(sigma_eps, delta, alpha)?.clamp(2, t)
    } else {
        2
    };
    let indices = select_equidistant_indices(t, n_opt)?;
    Ok((
        TrendReport {
            sigma_eps,
            delta,
            alpha,
            n_opt,
            indices,
        },
        fits,
    ))
}

/// One cell of the Monte Carlo bound-verification matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundCell {
    pub n: usize,
    pub sigma: f64,
    pub delta: f64,
    pub trials: usize,
    /// Theoretical tail bound.
    pub bound: f64,
    /// Empirical exceedance frequency `P(|b̂−b| > δ)`.
    pub empirical: f64,
    /// Binomial standard error of the empirical frequency.
    pub std_err: f64,
    /// Empirical `Var(b̂)` divided by `σ²/S_xx`.
    pub var_ratio: f64,
}

impl BoundCell {
    /// True when the empirical exceedance respects the bound within
    /// three binomial standard errors.
    pub fn holds(&self) -> bool {
        self.empirical <= self.bound + 3.0 * self.std_err
    }
}

/// Default matrix of the bound-verification command.
pub const DEFAULT_MC_NS: [usize; 4] = [5, 11, 21, 50];
pub const DEFAULT_MC_SIGMAS: [f64; 2] = [0.5, 1.0];
pub const DEFAULT_MC_DELTAS: [f64; 2] = [0.1, 0.2];

/// Run seeded Gaussian Monte Carlo for every `(n, σ, δ)` cell. Each cell
/// uses its own substream, so results do not depend on scheduling.
pub fn verify_bounds_matrix(
    ns: &[usize],
    sigmas: &[f64],
    deltas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<BoundCell>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let mut cells = Vec::new();
    for &n in ns {
        for &sigma in sigmas {
            for &delta in deltas {
                cells.push((n, sigma, delta));
            }
        }
    }
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(n, sigma, delta))| {
            let s_xx = sxx(n)?;
            let t_bar = (n as f64 - 1.0) / 2.0;
            let weights: Vec<f64> = (0..n).map(|i| (i as f64 - t_bar) / s_xx).collect();
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
            let mut rng = substream(seed, "mc-cell", idx as u64);
            let mut exceed = 0usize;
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let err: f64 = weights.iter().map(|w| w * normal.sample(&mut rng)).sum();
                if err.abs() > delta {
                    exceed += 1;
                }
                sum_sq += err * err;
            }
            let empirical = exceed as f64 / trials as f64;
            let std_err = (empirical * (1.0 - empirical) / trials as f64).sqrt();
            Ok(BoundCell {
                n,
                sigma,
                delta,
                trials,
                bound: concentration_bound(delta, s_xx, sigma * sigma),
                empirical,
                std_err,
                var_ratio: (sum_sq / trials as f64) / slope_variance(sigma * sigma, s_xx),
            })
        })
        .collect()
}
