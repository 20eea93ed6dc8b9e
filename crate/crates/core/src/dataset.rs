//! Time-series data model, CSV ingestion/serialization, and the synthetic
//! benchmark generator.
//!
//! Sampling convention: a grid of `T` samples covers one window of
//! `duration_seconds` (default 1 s) at positions `t_j = j/T`, i.e. the window
//! is sampled periodically and the right endpoint is excluded. Under this
//! convention an integer frequency in cycles per window falls exactly on a
//! DFT bin, so on-bin tones are removed exactly by deseasonalization. With a
//! 1 s window, "cycles per window" and "Hz" coincide.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Shared sample grid: `T` equidistant positions `t_j = j/T` on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    positions: Vec<f64>,
    /// Physical window length in seconds, if known. Converts cycles per
    /// window into Hz.
    pub duration_seconds: Option<f64>,
}

impl TimeGrid {
    /// Regular periodic grid with `len` samples.
    pub fn regular(len: usize, duration_seconds: Option<f64>) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 samples, got {len}"
            )));
        }
        let positions = (0..len).map(|j| j as f64 / len as f64).collect();
        Ok(TimeGrid {
            positions,
            duration_seconds,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
}

/// One observed series on the owning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
}

/// One sinusoidal component of a synthetic series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Cycles per window (Hz for a 1 s window).
    pub frequency: f64,
    /// Radians in `[0, 2π)`, sine convention.
    pub phase: f64,
}

/// Ground-truth generative parameters of one synthetic series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroundTruth {
    pub sinusoids: Vec<Sinusoid>,
    pub trend_intercept: f64,
    pub trend_slope: f64,
    pub event_scale: f64,
    pub event_center: f64,
    pub event_width: f64,
    pub noise_std: f64,
}

impl SyntheticGroundTruth {
    /// Noise-free analytic signal on `grid`.
    pub fn evaluate(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.positions()
            .iter()
            .map(|&t| {
                let seasonal: f64 = self
                    .sinusoids
                    .iter()
                    .map(|s| {
                        s.amplitude
                            * (2.0 * std::f64::consts::PI * s.frequency * t + s.phase).sin()
                    })
                    .sum();
                let trend = self.trend_intercept + self.trend_slope * t;
                let d = t - self.event_center;
                let event =
                    self.event_scale * (-d * d / (2.0 * self.event_width * self.event_width)).exp();
                seasonal + trend + event
            })
            .collect()
    }
}

/// A dataset of `N` equal-length series on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub grid: TimeGrid,
    pub series: Vec<TimeSeries>,
    pub ground_truth: Option<Vec<SyntheticGroundTruth>>,
    /// Root seed of the generator run, if synthetic.
    pub seed: Option<u64>,
}

impl TimeSeriesDataset {
    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn n_samples(&self) -> usize {
        self.grid.len()
    }

    fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::InvalidArgument("dataset has no series".into()));
        }
        for s in &self.series {
            if s.values.len() != self.grid.len() {
                return Err(Error::InvalidArgument(format!(
                    "series {} has {} values, grid has {}",
                    s.id,
                    s.values.len(),
                    self.grid.len()
                )));
            }
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "series {} contains non-finite value {v}",
                    s.id
                )));
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != self.series.len() {
                return Err(Error::InvalidArgument(
                    "ground truth length does not match series count".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Frequency centers of the benchmark's three seasonal modes, in Hz.
pub const FREQ_CENTERS_HZ: [f64; 3] = [3.5, 7.5, 12.0];
/// Per-series Gaussian jitter (std, Hz) applied around the centers.
pub const FREQ_JITTER_STD_HZ: f64 = 0.05;
/// Shared event width.
pub const EVENT_WIDTH: f64 = 0.05;

/// Generate the synthetic benchmark dataset.
///
/// Each series is three jittered sinusoids plus a linear trend, a localized
/// Gaussian event and i.i.d. Gaussian noise. Amplitudes are N(1, 0.3²)
/// resampled until ≥ 0.1, phases uniform on `[0, 2π)`, trend intercept
/// U(−0.5, 0.5), slope U(−1, 1), event scale U(−0.5, 0.5) centered
/// U(0.2, 0.8). Deterministic for a given `(n_series, n_samples, seed,
/// noise_std)`: series `i` draws from the substream `("series", i)`.
pub fn generate_synthetic(
    n_series: usize,
    n_samples: usize,
    seed: u64,
    noise_std: f64,
) -> Result<TimeSeriesDataset> {
    if n_series < 1 {
        return Err(Error::InvalidArgument("n_series must be >= 1".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("n_samples must be >= 2".into()));
    }
    if noise_std < 0.0 {
        return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
    }

    let grid = TimeGrid::regular(n_samples, Some(1.0))?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let amp_dist = Normal::new(1.0, 0.3).unwrap();
    let jitter = Normal::new(0.0, FREQ_JITTER_STD_HZ).unwrap();
    let phase_dist = Uniform::new(0.0, two_pi);
    let intercept_dist = Uniform::new(-0.5, 0.5);
    let slope_dist = Uniform::new(-1.0, 1.0);
    let scale_dist = Uniform::new(-0.5, 0.5);
    let center_dist = Uniform::new(0.2, 0.8);

    let mut series = Vec::with_capacity(n_series);
    let mut truths = Vec::with_capacity(n_series);
    for i in 0..n_series {
        let mut rng = substream(seed, "series", i as u64);
        let sinusoids = FREQ_CENTERS_HZ
            .iter()
            .map(|&c| {
                let frequency = c + jitter.sample(&mut rng);
                let amplitude = loop {
                    let a = amp_dist.sample(&mut rng);
                    if a >= 0.1 {
                        break a;
                    }
                };
                let phase = phase_dist.sample(&mut rng);
                Sinusoid {
                    amplitude,
                    frequency,
                    phase,
                }
            })
            .collect();
        let gt = SyntheticGroundTruth {
            sinusoids,
            trend_intercept: intercept_dist.sample(&mut rng),
            trend_slope: slope_dist.sample(&mut rng),
            event_scale: scale_dist.sample(&mut rng),
            event_center: center_dist.sample(&mut rng),
            event_width: EVENT_WIDTH,
            noise_std,
        };
        let mut values = gt.evaluate(&grid);
        if noise_std > 0.0 {
            let noise = Normal::new(0.0, noise_std).unwrap();
            for v in &mut values {
                *v += noise.sample(&mut rng);
            }
        } else {
            // keep the stream position independent of noise_std
            for _ in 0..values.len() {
                let _: f64 = rng.gen();
            }
        }
        series.push(TimeSeries {
            id: format!("s{i}"),
            values,
        });
        truths.push(gt);
    }

    let ds = TimeSeriesDataset {
        grid,
        series,
        ground_truth: Some(truths),
        seed: Some(seed),
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarMeta {
    duration_seconds: Option<f64>,
    n_series: usize,
    n_samples: usize,
    seed: Option<u64>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

/// Write the dataset as CSV (one series per row, header `t0,t1,...`) plus a
/// sidecar metadata JSON next to it.
pub fn save_csv(dataset: &TimeSeriesDataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut out = String::new();
    let header: Vec<String> = (0..dataset.n_samples()).map(|j| format!("t{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for s in &dataset.series {
        let row: Vec<String> = s.values.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())?;
    let meta = SidecarMeta {
        duration_seconds: dataset.grid.duration_seconds,
        n_series: dataset.n_series(),
        n_samples: dataset.n_samples(),
        seed: dataset.seed,
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    write_atomic(&sidecar_path(path), meta_json.as_bytes())?;
    Ok(())
}

/// Load a dataset from CSV. The header row is optional; the grid is inferred
/// as periodic-equidistant. Reads the sidecar metadata JSON if present.
pub fn load_csv(path: &Path) -> Result<TimeSeriesDataset> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if lineno == 0 => continue, // header row
            Err(_) => {
                let col = cells
                    .iter()
                    .position(|c| c.trim().parse::<f64>().is_err())
                    .unwrap_or(0);
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    row: lineno + 1,
                    message: format!("non-numeric cell in column {}", col + 1),
                });
            }
        };
        if let Some(w) = width {
            if values.len() != w {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    row: lineno + 1,
                    message: format!("row has {} cells, expected {}", values.len(), w),
                });
            }
        } else {
            width = Some(values.len());
        }
        rows.push(values);
    }
    let width = width.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        row: 0,
        message: "empty file".into(),
    })?;
    if width < 2 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            row: 1,
            message: "need at least 2 samples per series".into(),
        });
    }

    let mut duration = Some(1.0);
    let mut seed = None;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let meta: SidecarMeta = serde_json::from_str(&fs::read_to_string(&sidecar)?)
            .map_err(|e| Error::Parse(format!("sidecar {}: {e}", sidecar.display())))?;
        duration = meta.duration_seconds;
        seed = meta.seed;
    }

    let grid = TimeGrid::regular(width, duration)?;
    let series = rows
        .into_iter()
        .enumerate()
        .map(|(i, values)| TimeSeries {
            id: format!("s{i}"),
            values,
        })
        .collect();
    let ds = TimeSeriesDataset {
        grid,
        series,
        ground_truth: None,
        seed,
    };
    ds.validate()?;
    Ok(ds)
}

/// Write `bytes` to `path` via a temporary file and atomic rename, so a
/// failed command never leaves a partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = {
        let mut p = path.as_os_str().to_owned();
        p.push(".tmp");
        PathBuf::from(p)
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_shapes_and_determinism() {
        let a = generate_synthetic(5, 50, 42, 0.1).unwrap();
        let b = generate_synthetic(5, 50, 42, 0.1).unwrap();
        assert_eq!(a.n_series(), 5);
        assert_eq!(a.n_samples(), 50);
        for (x, y) in a.series.iter().zip(&b.series) {
            assert_eq!(x.values, y.values);
        }
        let c = generate_synthetic(5, 50, 43, 0.1).unwrap();
        assert_ne!(a.series[0].values, c.series[0].values);
    }

    #[test]
    fn noise_free_matches_ground_truth() {
        let ds = generate_synthetic(4, 64, 1, 0.0).unwrap();
        let gt = ds.ground_truth.as_ref().unwrap();
        for (s, g) in ds.series.iter().zip(gt) {
            let analytic = g.evaluate(&ds.grid);
            for (a, b) in s.values.iter().zip(&analytic) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_point_series() {
        let ds = generate_synthetic(1, 2, 9, 0.0).unwrap();
        let gt = &ds.ground_truth.as_ref().unwrap()[0];
        let analytic = gt.evaluate(&ds.grid);
        assert_eq!(ds.series[0].values.len(), 2);
        for (a, b) in ds.series[0].values.iter().zip(&analytic) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_components_reduce_to_trend() {
        let grid = TimeGrid::regular(100, Some(1.0)).unwrap();
        let gt = SyntheticGroundTruth {
            sinusoids: vec![
                Sinusoid { amplitude: 0.0, frequency: 3.5, phase: 0.1 };
                3
            ],
            trend_intercept: 1.0,
            trend_slope: 2.0,
            event_scale: 0.0,
            event_center: 0.5,
            event_width: 0.05,
            noise_std: 0.0,
        };
        let y = gt.evaluate(&grid);
        for (&t, &v) in grid.positions().iter().zip(&y) {
            assert!((v - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_counts_rejected() {
        assert!(generate_synthetic(0, 10, 1, 0.0).is_err());
        assert!(generate_synthetic(1, 1, 1, 0.0).is_err());
        assert!(generate_synthetic(1, 10, 1, -0.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = generate_synthetic(5, 50, 3, 0.1).unwrap();
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.n_series(), 5);
        assert_eq!(back.n_samples(), 50);
        assert_eq!(back.seed, Some(3));
        assert_eq!(back.grid.duration_seconds, Some(1.0));
        for (a, b) in ds.series.iter().zip(&back.series) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn csv_without_header_or_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        fs::write(&path, "1.0,2.0,3.0\n4.0,5.0,6.0\n").unwrap();
        let ds = load_csv(&path).unwrap();
        assert_eq!(ds.n_series(), 2);
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.series[1].values, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn csv_header_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        fs::write(&path, "t0,t1,t2\n1.5,2.5,3.5\n").unwrap();
        let ds = load_csv(&path).unwrap();
        assert_eq!(ds.n_series(), 1);
    }

    #[test]
    fn ragged_row_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1,2,3\n4,5\n").unwrap();
        match load_csv(&path) {
            Err(Error::Format { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn empty_write_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = TimeSeriesDataset {
            grid: TimeGrid::regular(4, None).unwrap(),
            series: vec![],
            ground_truth: None,
            seed: None,
        };
        assert!(save_csv(&ds, &dir.path().join("x.csv")).is_err());
    }
}
