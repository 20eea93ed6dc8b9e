//! End-to-end derivation of the data-driven configuration vector: spectral
//! analysis fixes the stage count and per-mode initialization statistics,
//! trend analysis fixes the trend window length and slope/bias statistics.
//!
//! The result is a versioned `PriorConfig` JSON document — the contract
//! between the `analyze` and `train` commands.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::spectral::{average_periodogram, per_series_mode_params, select_modes, SpectralMode};
use crate::trend::trend_report;

/// Energy-ratio level below which seasonality is flagged as weak.
pub const WEAK_SEASONALITY_RHO: f64 = 0.5;

/// Variance floor for frequency statistics (cycles/window)².
const FREQ_VARIANCE_FLOOR: f64 = 1e-6;

/// Empirical mean/variance of one initialization role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    /// Role: amplitude | frequency | phase | slope | bias.
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

/// Per-mode seasonal statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePriors {
    pub amplitude: ParamStats,
    /// Frequency in cycles per unit time.
    pub frequency: ParamStats,
    /// Cosine-convention phase; circular mean/variance.
    pub phase: ParamStats,
}

/// Trend-line statistics on the normalized time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPriors {
    pub slope: ParamStats,
    pub bias: ParamStats,
}

/// How the configuration was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_sha256: String,
    pub n_series: usize,
    pub n_samples: usize,
    pub tau: f64,
    pub delta: f64,
    pub alpha: f64,
}

/// The derived architecture + initialization configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub schema_version: u32,
    /// Number of seasonal decomposition stages.
    pub s: usize,
    pub modes: Vec<SpectralMode>,
    /// Trend encoder input length.
    pub n_in: usize,
    pub trend_indices: Vec<usize>,
    pub seasonal_stats: Vec<ModePriors>,
    pub trend_stats: TrendPriors,
    pub rho_spec: f64,
    pub sigma_eps: f64,
    pub weak_seasonality: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Circular mean (arg of the mean unit phasor) and circular variance 1 − R.
fn circular_mean_var(angles: &[f64]) -> (f64, f64) {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), &a| (s + a.sin(), c + a.cos()));
    let r = (s * s + c * c).sqrt() / n;
    (s.atan2(c), 1.0 - r)
}

fn stats(name: &str, values: &[f64]) -> ParamStats {
    let (mean, variance) = mean_var(values);
    ParamStats {
        name: name.into(),
        mean,
        variance,
        count: values.len(),
    }
}

/// SHA-256 of the dataset's grid and raw sample bytes.
pub fn dataset_hash(dataset: &TimeSeriesDataset) -> String {
    let mut h = Sha256::new();
    h.update((dataset.grid.len() as u64).to_le_bytes());
    if let Some(d) = dataset.grid.duration_seconds {
        h.update(d.to_le_bytes());
    }
    for s in &dataset.series {
        h.update(s.id.as_bytes());
        for &v in &s.values {
            h.update(v.to_le_bytes());
        }
    }
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run the full configuration pipeline: periodogram averaging, mode
/// selection, per-series seasonal parameters, deseasonalized trend fits,
/// window sizing, and empirical per-role statistics.
pub fn derive_config(
    dataset: &TimeSeriesDataset,
    tau: f64,
    delta: f64,
    alpha: f64,
) -> Result<PriorConfig> {
    let periodogram = average_periodogram(dataset)?;
    let mut spectral = select_modes(&periodogram, tau)?;
    let mut warnings = Vec::new();

    let seasonal_stats = if spectral.modes.is_empty() {
        warnings.push("no supra-threshold spectral modes; seasonal stages disabled".into());
        Vec::new()
    } else {
        let params = per_series_mode_params(dataset, &spectral.modes)?;
        let n_modes = spectral.modes.len();
        let per_mode: Vec<ModePriors> = (0..n_modes)
            .map(|m| {
                let amps: Vec<f64> = params.iter().map(|p| p[m].amplitude).collect();
                let freqs: Vec<f64> = params.iter().map(|p| p[m].frequency).collect();
                let phases: Vec<f64> = params.iter().map(|p| p[m].phase).collect();
                let mut frequency = stats("frequency", &freqs);
                frequency.variance = frequency.variance.max(FREQ_VARIANCE_FLOOR);
                let (pm, pv) = circular_mean_var(&phases);
                ModePriors {
                    amplitude: stats("amplitude", &amps),
                    frequency,
                    phase: ParamStats {
                        name: "phase".into(),
                        mean: pm,
                        variance: pv,
                        count: phases.len(),
                    },
                }
            })
            .collect();
        spectral.per_series_params = Some(params);
        per_mode
    };

    let (trend, fits) = trend_report(dataset, &spectral, delta, alpha)?;
    // fits are per index step; the model grid is normalized to [0, 1), so
    // slopes convert by the factor T
    let t = dataset.n_samples() as f64;
    let slopes: Vec<f64> = fits.iter().map(|f| f.slope * t).collect();
    let biases: Vec<f64> = fits.iter().map(|f| f.intercept).collect();

    let weak_seasonality = spectral.rho_spec < WEAK_SEASONALITY_RHO;
    if weak_seasonality {
        warnings.push(format!(
            "weak seasonality: rho_spec = {:.3} < {WEAK_SEASONALITY_RHO}",
            spectral.rho_spec
        ));
    }

    Ok(PriorConfig {
        schema_version: 1,
        s: spectral.modes.len(),
        modes: spectral.modes,
        n_in: trend.n_opt,
        trend_indices: trend.indices,
        seasonal_stats,
        trend_stats: TrendPriors {
            slope: stats("slope", &slopes),
            bias: stats("bias", &biases),
        },
        rho_spec: spectral.rho_spec,
        sigma_eps: trend.sigma_eps,
        weak_seasonality,
        warnings,
        provenance: Provenance {
            dataset_sha256: dataset_hash(dataset),
            n_series: dataset.n_series(),
            n_samples: dataset.n_samples(),
            tau,
            delta,
            alpha,
        },
    })
}

pub fn config_to_json(config: &PriorConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

const KNOWN_KEYS: [&str; 12] = [
    "schema_version",
    "s",
    "modes",
    "n_in",
    "trend_indices",
    "seasonal_stats",
    "trend_stats",
    "rho_spec",
    "sigma_eps",
    "weak_seasonality",
    "warnings",
    "provenance",
];

/// Parse a configuration document. Unknown top-level keys are ignored and
/// reported in the returned warning list; missing fields error by name.
pub fn config_from_json(json: &str) -> Result<(PriorConfig, Vec<String>)> {
    let value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    let mut warnings = Vec::new();
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                warnings.push(format!("ignoring unknown key {key:?}"));
            }
        }
    }
    let config: PriorConfig =
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    if config.schema_version != 1 {
        return Err(Error::Parse(format!(
            "unsupported schema_version {}, expected 1",
            config.schema_version
        )));
    }
    if config.s != config.modes.len() || config.seasonal_stats.len() != config.s {
        return Err(Error::Parse(
            "inconsistent config: s, modes, and seasonal_stats must agree".into(),
        ));
    }
    if config.n_in != config.trend_indices.len() || config.n_in < 2 {
        return Err(Error::Parse(
            "inconsistent config: n_in must equal |trend_indices| and be >= 2".into(),
        ));
    }
    Ok((config, warnings))
}
