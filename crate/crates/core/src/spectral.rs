//! Periodogram estimation, dominant-mode selection, per-series seasonal
//! parameter extraction and deseasonalization.
//!
//! The canonical periodogram is the unpadded length-`n` DFT, so bin `k` sits
//! at `k` cycles per window. The DC bin is excluded both from the peak power
//! `P_max` and from the spectral energy ratio: constant offsets and slow
//! drift belong to the trend stage, and a large DC term would otherwise
//! suppress genuine seasonal peaks.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::{TimeGrid, TimeSeriesDataset};
use crate::error::{Error, Result};

/// One-sided periodogram of a length-`n` series.
#[derive(Debug, Clone)]
pub struct Periodogram {
    /// Sample count of the underlying series.
    pub n: usize,
    /// Bin frequencies `k` for `k = 0..=n/2`, in cycles per window.
    pub freqs: Vec<f64>,
    /// `I_y(ω_k) = |Y(ω_k)|² / n`.
    pub power: Vec<f64>,
    /// `C_k = Y(ω_k) / n`.
    pub coeffs: Vec<Complex64>,
}

impl Periodogram {
    /// Multiplicity of bin `k` when folding the two-sided spectrum: interior
    /// bins carry their conjugate mirror, DC and Nyquist do not.
    fn fold_weight(&self, k: usize) -> f64 {
        if k == 0 || (self.n % 2 == 0 && k == self.n / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// Total two-sided spectral power excluding the DC bin.
    pub fn total_power_excl_dc(&self) -> f64 {
        (1..self.power.len())
            .map(|k| self.fold_weight(k) * self.power[k])
            .sum()
    }

    /// CSV export (`freq,power`) for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq,power\n");
        for (f, p) in self.freqs.iter().zip(&self.power) {
            out.push_str(&format!("{f},{p}\n"));
        }
        out
    }
}

/// Exact DFT periodogram of one series.
pub fn dft(values: &[f64]) -> Result<Periodogram> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "periodogram needs at least 2 samples".into(),
        ));
    }
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let freqs = (0..=half).map(|k| k as f64).collect();
    let power = buf[..=half]
        .iter()
        .map(|y| y.norm_sqr() / n as f64)
        .collect();
    let coeffs = buf[..=half].iter().map(|y| y / n as f64).collect();
    Ok(Periodogram {
        n,
        freqs,
        power,
        coeffs,
    })
}

fn pairwise_mean(parts: &[Periodogram]) -> (Vec<f64>, Vec<Complex64>) {
    fn sum_range(parts: &[Periodogram], lo: usize, hi: usize) -> (Vec<f64>, Vec<Complex64>) {
        if hi - lo == 1 {
            return (parts[lo].power.clone(), parts[lo].coeffs.clone());
        }
        let mid = lo + (hi - lo) / 2;
        let (mut pa, mut ca) = sum_range(parts, lo, mid);
        let (pb, cb) = sum_range(parts, mid, hi);
        for (a, b) in pa.iter_mut().zip(&pb) {
            *a += b;
        }
        for (a, b) in ca.iter_mut().zip(&cb) {
            *a += b;
        }
        (pa, ca)
    }
    let (mut p, mut c) = sum_range(parts, 0, parts.len());
    let inv = 1.0 / parts.len() as f64;
    for v in &mut p {
        *v *= inv;
    }
    for v in &mut c {
        *v *= inv;
    }
    (p, c)
}

/// Element-wise mean of the per-series periodograms, using pairwise
/// summation so the reduction is deterministic and well conditioned.
pub fn average_periodogram(dataset: &TimeSeriesDataset) -> Result<Periodogram> {
    if dataset.series.is_empty() {
        return Err(Error::InvalidArgument("dataset has no series".into()));
    }
    let parts: Vec<Periodogram> = dataset
        .series
        .iter()
        .map(|s| dft(&s.values))
        .collect::<Result<_>>()?;
    let (power, coeffs) = pairwise_mean(&parts);
    Ok(Periodogram {
        n: parts[0].n,
        freqs: parts[0].freqs.clone(),
        power,
        coeffs,
    })
}

/// One dominant spectral mode (a merged run of supra-threshold bins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode {
    /// Locally maximal bin of the run.
    pub bin: usize,
    /// Power-weighted centroid frequency of the run, cycles per window.
    pub freq: f64,
    /// `2·sqrt(I(ω_bin)/n)`, i.e. the amplitude implied by the averaged power.
    pub amplitude: f64,
    /// `arg` of the averaged complex coefficient at `bin`, in `(−π, π]`.
    pub phase: f64,
    /// `I(ω_bin) / P_max`.
    pub power_share: f64,
    /// All bins of the supra-threshold run this mode was merged from.
    pub run: Vec<usize>,
}

/// Per-series seasonal parameters measured at one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// `2|C_k|` at the mode's bin.
    pub amplitude: f64,
    /// Power-weighted centroid over the mode's run bins in this series'
    /// own periodogram, cycles per window.
    pub frequency: f64,
    /// `arg C_k` at the mode's bin (cosine convention).
    pub phase: f64,
    /// Bin the amplitude/phase were measured at.
    pub bin: usize,
}

/// Dominant-mode report for one (averaged) periodogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub tau: f64,
    pub p_max: f64,
    pub rho_spec: f64,
    /// Modes ordered by descending peak power.
    pub modes: Vec<SpectralMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_series_params: Option<Vec<Vec<ModeParams>>>,
}

impl SpectralReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Select dominant modes by relative-power thresholding.
///
/// Bins `k ∈ [1, n/2]` with `I(ω_k) ≥ τ·P_max` are retained; contiguous
/// supra-threshold runs collapse into one mode at the run's argmax bin. The
/// energy ratio counts every retained bin (and its conjugate mirror) against
/// the total non-DC spectral energy.
pub fn select_modes(periodogram: &Periodogram, tau: f64) -> Result<SpectralReport> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    let half = periodogram.n / 2;
    let p_max = periodogram.power[1..=half]
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    let supra: Vec<usize> = (1..=half)
        .filter(|&k| p_max > 0.0 && periodogram.power[k] >= tau * p_max)
        .collect();

    let mut modes = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    for &k in supra.iter() {
        if let Some(&last) = run.last() {
            if k != last + 1 {
                modes.push(merge_run(periodogram, &run, p_max));
                run.clear();
            }
        }
        run.push(k);
    }
    if !run.is_empty() {
        modes.push(merge_run(periodogram, &run, p_max));
    }
    modes.sort_by(|a, b| {
        b.power_share
            .partial_cmp(&a.power_share)
            .expect("finite power")
            .then(a.bin.cmp(&b.bin))
    });

    let total = periodogram.total_power_excl_dc();
    let retained: f64 = supra
        .iter()
        .map(|&k| periodogram.fold_weight(k) * periodogram.power[k])
        .sum();
    let rho_spec = if total > 0.0 { retained / total } else { 0.0 };

    Ok(SpectralReport {
        tau,
        p_max,
        rho_spec,
        modes,
        per_series_params: None,
    })
}

fn merge_run(p: &Periodogram, run: &[usize], p_max: f64) -> SpectralMode {
    let bin = *run
        .iter()
        .max_by(|&&a, &&b| p.power[a].partial_cmp(&p.power[b]).expect("finite power"))
        .expect("nonempty run");
    let wsum: f64 = run.iter().map(|&k| p.power[k]).sum();
    let freq = run.iter().map(|&k| k as f64 * p.power[k]).sum::<f64>() / wsum;
    SpectralMode {
        bin,
        freq,
        amplitude: 2.0 * (p.power[bin] / p.n as f64).sqrt(),
        phase: p.coeffs[bin].arg(),
        power_share: p.power[bin] / p_max,
        run: run.to_vec(),
    }
}

/// Measure `(A, f, φ)` for every series at every mode, from that series'
/// own DFT.
pub fn per_series_mode_params(
    dataset: &TimeSeriesDataset,
    modes: &[SpectralMode],
) -> Result<Vec<Vec<ModeParams>>> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("mode set is empty".into()));
    }
    dataset
        .series
        .iter()
        .map(|s| {
            let p = dft(&s.values)?;
            Ok(modes
                .iter()
                .map(|m| {
                    let c = p.coeffs[m.bin];
                    let wsum: f64 = m.run.iter().map(|&k| p.power[k]).sum();
                    let frequency = if wsum > 0.0 {
                        m.run.iter().map(|&k| k as f64 * p.power[k]).sum::<f64>() / wsum
                    } else {
                        m.freq
                    };
                    ModeParams {
                        amplitude: 2.0 * c.norm(),
                        frequency,
                        phase: c.arg(),
                        bin: m.bin,
                    }
                })
                .collect())
        })
        .collect()
}

/// Subtract the fitted dominant cosines from one series:
/// `y(t) − Σ_k A_k cos(2π k t + φ_k)` with `k` the mode bin, evaluated on
/// the grid. On the periodic grid this removes the mode bins exactly.
pub fn deseasonalize(values: &[f64], params: &[ModeParams], grid: &TimeGrid) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    grid.positions()
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let seasonal: f64 = params
                .iter()
                .map(|p| p.amplitude * (two_pi * p.bin as f64 * t + p.phase).cos())
                .sum();
            y - seasonal
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, TimeSeries, TimeSeriesDataset};

    fn tone(n: usize, amp: f64, cycles: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|j| {
                amp * (2.0 * std::f64::consts::PI * cycles * j as f64 / n as f64 + phase).sin()
            })
            .collect()
    }

    fn dataset_from(rows: Vec<Vec<f64>>) -> TimeSeriesDataset {
        let n = rows[0].len();
        TimeSeriesDataset {
            grid: TimeGrid::regular(n, Some(1.0)).unwrap(),
            series: rows
                .into_iter()
                .enumerate()
                .map(|(i, values)| TimeSeries {
                    id: format!("s{i}"),
                    values,
                })
                .collect(),
            ground_truth: None,
            seed: None,
        }
    }

    #[test]
    fn pure_tone_lands_on_its_bin() {
        let p = dft(&tone(100, 2.0, 5.0, 0.0)).unwrap();
        let amp = 2.0 * p.coeffs[5].norm();
        assert!((amp - 2.0).abs() < 1e-6);
        for k in 0..=50 {
            if k != 5 {
                assert!(p.power[k] < 1e-6, "bin {k} has power {}", p.power[k]);
            }
        }
    }

    #[test]
    fn constant_series_is_pure_dc() {
        let p = dft(&vec![3.0; 64]).unwrap();
        assert!(p.power[0] > 1.0);
        for k in 1..=32 {
            assert!(p.power[k] < 1e-9);
        }
        let report = select_modes(&p, 0.2).unwrap();
        assert!(report.modes.is_empty());
        assert_eq!(report.rho_spec, 0.0);
    }

    #[test]
    fn parseval_identity() {
        for seed in 0..5u64 {
            let ds = generate_synthetic(1, 97, seed, 0.3).unwrap();
            let y = &ds.series[0].values;
            let p = dft(y).unwrap();
            let time_energy: f64 = y.iter().map(|v| v * v).sum();
            let spec_energy: f64 = (0..p.power.len())
                .map(|k| p.fold_weight(k) * p.power[k])
                .sum();
            assert!(
                (time_energy - spec_energy).abs() <= 1e-9 * time_energy.abs(),
                "Parseval violated: {time_energy} vs {spec_energy}"
            );
        }
    }

    #[test]
    fn average_of_identical_series_matches_single() {
        let y = tone(100, 1.5, 7.0, 0.4);
        let ds = dataset_from(vec![y.clone(), y.clone()]);
        let avg = average_periodogram(&ds).unwrap();
        let single = dft(&y).unwrap();
        for (a, b) in avg.power.iter().zip(&single.power) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn disjoint_tones_average_at_half_power() {
        let a = tone(100, 2.0, 3.0, 0.0);
        let b = tone(100, 2.0, 7.0, 0.0);
        let pa = dft(&a).unwrap();
        let avg = average_periodogram(&dataset_from(vec![a, b])).unwrap();
        assert!((avg.power[3] - pa.power[3] / 2.0).abs() < 1e-9);
        assert!((avg.power[7] - pa.power[3] / 2.0).abs() < 1e-9);
    }

    #[test]
    fn single_tone_mode_selection() {
        let p = dft(&tone(100, 2.0, 5.0, 0.3)).unwrap();
        let report = select_modes(&p, 0.2).unwrap();
        assert_eq!(report.modes.len(), 1);
        assert_eq!(report.modes[0].bin, 5);
        assert!(report.rho_spec >= 0.999);
    }

    #[test]
    fn tau_out_of_range_rejected() {
        let p = dft(&tone(32, 1.0, 3.0, 0.0)).unwrap();
        assert!(select_modes(&p, 0.0).is_err());
        assert!(select_modes(&p, 1.5).is_err());
    }

    #[test]
    fn white_noise_high_tau_keeps_only_near_peak_bins() {
        use rand_distr::Distribution;
        let mut rng = crate::rng::substream(99, "white", 0);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..256).map(|_| normal.sample(&mut rng)).collect();
        let p = dft(&y).unwrap();
        let report = select_modes(&p, 0.99).unwrap();
        assert!(!report.modes.is_empty());
        for m in &report.modes {
            assert!(p.power[m.bin] >= 0.99 * report.p_max);
        }
        assert!(report.rho_spec < 0.2);
    }

    #[test]
    fn phase_measurement_matches_sine_to_cosine_shift() {
        // sin(x) = cos(x - π/2), so a sine tone with phase 0.3 measures a
        // cosine phase of 0.3 - π/2.
        let y = tone(100, 2.0, 5.0, 0.3);
        let p = dft(&y).unwrap();
        let report = select_modes(&p, 0.2).unwrap();
        let ds = dataset_from(vec![y]);
        let params = per_series_mode_params(&ds, &report.modes).unwrap();
        let m = params[0][0];
        assert!((m.amplitude - 2.0).abs() < 1e-9);
        assert!((m.frequency - 5.0).abs() < 1e-9);
        assert!((m.phase - (0.3 - std::f64::consts::FRAC_PI_2)).abs() < 1e-9);
    }

    #[test]
    fn zero_series_measures_zero_amplitude() {
        let p = dft(&tone(64, 1.0, 4.0, 0.0)).unwrap();
        let report = select_modes(&p, 0.2).unwrap();
        let ds = dataset_from(vec![vec![0.0; 64]]);
        let params = per_series_mode_params(&ds, &report.modes).unwrap();
        assert_eq!(params[0][0].amplitude, 0.0);
    }

    #[test]
    fn on_bin_tone_cancels_exactly() {
        let y = tone(100, 2.0, 5.0, 1.1);
        let ds = dataset_from(vec![y.clone()]);
        let p = dft(&y).unwrap();
        let report = select_modes(&p, 0.2).unwrap();
        let params = per_series_mode_params(&ds, &report.modes).unwrap();
        let residual = deseasonalize(&y, &params[0], &ds.grid);
        let max = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-6, "residual max {max}");
    }

    #[test]
    fn zero_series_has_zero_residual() {
        let p = dft(&tone(64, 1.0, 4.0, 0.0)).unwrap();
        let report = select_modes(&p, 0.2).unwrap();
        let ds = dataset_from(vec![vec![0.0; 64]]);
        let params = per_series_mode_params(&ds, &report.modes).unwrap();
        let residual = deseasonalize(&ds.series[0].values, &params[0], &ds.grid);
        assert!(residual.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_plus_line_leaves_the_line() {
        let n = 100;
        let grid = TimeGrid::regular(n, Some(1.0)).unwrap();
        let y: Vec<f64> = grid
            .positions()
            .iter()
            .map(|&t| 2.0 * (2.0 * std::f64::consts::PI * 5.0 * t).sin() + 1.0 + 0.5 * t)
            .collect();
        let ds = dataset_from(vec![y.clone()]);
        let p = average_periodogram(&ds).unwrap();
        let report = select_modes(&p, 0.2).unwrap();
        let params = per_series_mode_params(&ds, &report.modes).unwrap();
        let residual = deseasonalize(&y, &params[0], &ds.grid);
        // away from the window edges the residual tracks the line within 5%
        for j in 10..n - 10 {
            let t = grid.positions()[j];
            let line = 1.0 + 0.5 * t;
            assert!(
                (residual[j] - line).abs() < 0.05 * line.abs(),
                "at t={t}: {} vs {line}",
                residual[j]
            );
        }
    }

    #[test]
    fn scale_equivariance_of_detection() {
        let ds = generate_synthetic(20, 100, 5, 0.01).unwrap();
        let scaled = TimeSeriesDataset {
            grid: ds.grid.clone(),
            series: ds
                .series
                .iter()
                .map(|s| TimeSeries {
                    id: s.id.clone(),
                    values: s.values.iter().map(|v| v * -3.0).collect(),
                })
                .collect(),
            ground_truth: None,
            seed: None,
        };
        let r1 = select_modes(&average_periodogram(&ds).unwrap(), 0.2).unwrap();
        let r2 = select_modes(&average_periodogram(&scaled).unwrap(), 0.2).unwrap();
        let bins1: Vec<usize> = r1.modes.iter().map(|m| m.bin).collect();
        let bins2: Vec<usize> = r2.modes.iter().map(|m| m.bin).collect();
        assert_eq!(bins1, bins2);
        assert!((r1.rho_spec - r2.rho_spec).abs() < 1e-12);
        for (a, b) in r1.modes.iter().zip(&r2.modes) {
            assert!((b.amplitude - 3.0 * a.amplitude).abs() < 1e-9);
        }
    }

    #[test]
    fn rho_non_increasing_in_tau() {
        let ds = generate_synthetic(50, 100, 11, 0.05).unwrap();
        let p = average_periodogram(&ds).unwrap();
        let mut last = f64::INFINITY;
        for tau in [0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95] {
            let r = select_modes(&p, tau).unwrap();
            assert!(r.rho_spec <= last + 1e-12);
            last = r.rho_spec;
        }
    }
}
