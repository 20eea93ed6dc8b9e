//! Training harness: MSE objective, Adam updates, early stopping on a
//! validation split, and the four-variant paired comparison protocol.
//!
//! Everything is seeded through named substreams, so a (dataset, seed,
//! config) triple reproduces every metric bitwise regardless of `--jobs`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::model::{build_model, BofModel, InitVariant, DEFAULT_HIDDEN};
use crate::priors::PriorConfig;
use crate::rng::substream;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Absolute validation-MSE improvement that resets early stopping.
pub const EARLY_STOP_MIN_IMPROVEMENT: f64 = 1e-6;

/// Maximum retained points per recorded trajectory.
pub const MAX_TRAJECTORY_POINTS: usize = 2000;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.2,
            seed: 0,
            trials: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.batch_size == 0
            || self.patience == 0
            || !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5)
            || self.trials == 0
        {
            return Err(Error::InvalidArgument(
                "training config needs lr > 0, batch >= 1, patience >= 1, \
                 validation fraction in (0, 0.5], trials >= 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// First/second moment state for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> AdamState {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One standard Adam update with bias correction.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "adam_step shape mismatch: {} params, {} grads, {} state",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Mean squared error between two equal-length slices.
pub fn mse(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "mse needs equal nonempty lengths, got {} and {}",
            prediction.len(),
            target.len()
        )));
    }
    Ok(prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / prediction.len() as f64)
}

/// Series indices of the train/validation/test partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle the series and carve off 20% test, then `validation_fraction` of
/// the remainder for validation (64/16/20 at the defaults).
pub fn split_dataset(
    n_series: usize,
    validation_fraction: f64,
    seed: u64,
    trial: u64,
) -> Result<DataSplit> {
    let mut indices: Vec<usize> = (0..n_series).collect();
    let mut rng = substream(seed, "split", trial);
    indices.shuffle(&mut rng);
    let n_test = ((n_series as f64) * 0.2).round() as usize;
    let n_val = (((n_series - n_test) as f64) * validation_fraction).round() as usize;
    let n_train = n_series.saturating_sub(n_test + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "dataset with {n_series} series is too small to split"
        )));
    }
    let test = indices.split_off(n_series - n_test);
    let validation = indices.split_off(indices.len() - n_val);
    Ok(DataSplit {
        train: indices,
        validation,
        test,
    })
}

/// Per-batch metric trajectory, decimated to a bounded length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<u64>,
    pub loss: Vec<f64>,
    pub displacement: Vec<f64>,
}

impl Trajectory {
    fn new() -> Trajectory {
        Trajectory {
            steps: Vec::new(),
            loss: Vec::new(),
            displacement: Vec::new(),
        }
    }

    fn push(&mut self, step: u64, loss: f64, displacement: f64) {
        self.steps.push(step);
        self.loss.push(loss);
        self.displacement.push(displacement);
        if self.steps.len() > MAX_TRAJECTORY_POINTS {
            // drop every other point; recorded steps keep the x-axis honest
            let keep = |i: &usize| i % 2 == 0;
            self.steps = decimate(&self.steps, keep);
            self.loss = decimate(&self.loss, keep);
            self.displacement = decimate(&self.displacement, keep);
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,displacement\n");
        for i in 0..self.steps.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.steps[i], self.loss[i], self.displacement[i]
            ));
        }
        out
    }
}

fn decimate<T: Copy>(v: &[T], keep: impl Fn(&usize) -> bool) -> Vec<T> {
    v.iter()
        .enumerate()
        .filter(|(i, _)| keep(i))
        .map(|(_, x)| *x)
        .collect()
}

/// Metrics of one training trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub variant: InitVariant,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_train_mse: f64,
    pub final_validation_mse: f64,
    pub final_test_mse: f64,
    pub final_displacement: f64,
    pub epochs_run: usize,
    pub param_count: usize,
    pub wall_seconds: f64,
    pub trajectory: Trajectory,
}

fn mean_mse_over(model: &BofModel, dataset: &TimeSeriesDataset, indices: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let x = &dataset.series[i].values;
        let fwd = model.forward(x)?;
        total += mse(&fwd.reconstruction, x)?;
    }
    Ok(total / indices.len() as f64)
}

/// Mini-batch Adam training with early stopping; returns the metrics and
/// leaves `model` holding the best-validation parameters.
pub fn train_model(
    model: &mut BofModel,
    dataset: &TimeSeriesDataset,
    split: &DataSplit,
    config: &TrainConfig,
) -> Result<TrialResult> {
    config.validate()?;
    if split.train.is_empty() || split.validation.is_empty() || split.test.is_empty() {
        return Err(Error::InvalidArgument("empty data split".into()));
    }
    let started = Instant::now();
    let t = model.n_samples();
    if dataset.n_samples() != t {
        return Err(Error::InvalidArgument(format!(
            "model expects series of length {t}, dataset has {}",
            dataset.n_samples()
        )));
    }
    let init_snapshot = model.snapshot();
    let mut params = init_snapshot.clone();
    let mut adam = AdamState::new(params.len());
    let mut trajectory = Trajectory::new();

    let mut best_val = mean_mse_over(model, dataset, &split.validation)?;
    let mut best_params = params.clone();
    let mut stale_epochs = 0usize;
    let mut epochs_run = 0usize;
    let mut step = 0u64;
    let mut initial_loss = None;

    'epochs: for epoch in 0..config.max_epochs {
        let mut order = split.train.clone();
        order.shuffle(&mut substream(config.seed, "shuffle", epoch as u64));
        for batch in order.chunks(config.batch_size) {
            // loss and displacement are recorded before the update
            let b = batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut grads = vec![0.0; params.len()];
            for &i in batch {
                let x = &dataset.series[i].values;
                let fwd = model.forward(x)?;
                batch_loss += mse(&fwd.reconstruction, x)?;
                let grad_recon: Vec<f64> = fwd
                    .reconstruction
                    .iter()
                    .zip(x)
                    .map(|(r, v)| 2.0 * (r - v) / (b * t as f64))
                    .collect();
                let stage_grads = model.backward(&fwd, &grad_recon)?;
                let mut k = 0;
                for sg in &stage_grads {
                    for l in 0..sg.weights.len() {
                        for g in &sg.weights[l] {
                            grads[k] += g;
                            k += 1;
                        }
                        for g in &sg.biases[l] {
                            grads[k] += g;
                            k += 1;
                        }
                    }
                }
            }
            batch_loss /= b;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at step {step} (seed {})",
                    config.seed
                )));
            }
            initial_loss.get_or_insert(batch_loss);
            trajectory.push(step, batch_loss, model.displacement(&init_snapshot)?);
            adam_step(
                &mut params,
                &grads,
                &mut adam,
                config.learning_rate,
                ADAM_BETA1,
                ADAM_BETA2,
                ADAM_EPS,
            )?;
            model.restore(&params)?;
            step += 1;
        }
        epochs_run = epoch + 1;
        let val = mean_mse_over(model, dataset, &split.validation)?;
        if val < best_val - EARLY_STOP_MIN_IMPROVEMENT {
            best_val = val;
            best_params = params.clone();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break 'epochs;
            }
        }
    }

    model.restore(&best_params)?;
    if trajectory.steps.is_empty() {
        // zero-epoch run: record the untouched initialization
        let loss = mean_mse_over(model, dataset, &split.train)?;
        initial_loss.get_or_insert(loss);
        trajectory.push(0, loss, 0.0);
    }
    Ok(TrialResult {
        variant: model.variant,
        seed: config.seed,
        initial_loss: initial_loss.unwrap(),
        final_train_mse: mean_mse_over(model, dataset, &split.train)?,
        final_validation_mse: best_val,
        final_test_mse: mean_mse_over(model, dataset, &split.test)?,
        final_displacement: model.displacement(&init_snapshot)?,
        epochs_run,
        param_count: model.param_count(),
        wall_seconds: started.elapsed().as_secs_f64(),
        trajectory,
    })
}

/// Aggregate over trials for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: InitVariant,
    pub label: String,
    pub param_count: usize,
    pub mean_train_mse: f64,
    pub std_train_mse: f64,
    pub mean_test_mse: f64,
    pub std_test_mse: f64,
    pub mean_initial_loss: f64,
    pub mean_displacement: f64,
    pub trials: Vec<TrialResult>,
    /// Trajectory of the best-test-MSE trial.
    pub best_trajectory: Trajectory,
}

/// Four-variant paired comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub n_trials: usize,
    pub variants: Vec<VariantSummary>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self, variant: InitVariant) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == variant)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run `trials` paired trials for each initialization variant.
///
/// Trial k shares its data split across variants; each (variant, trial) pair
/// draws its model parameters from an independent substream, so execution
/// order and parallelism never change the results.
pub fn run_comparison(
    dataset: &TimeSeriesDataset,
    config: &PriorConfig,
    tc: &TrainConfig,
) -> Result<ComparisonReport> {
    tc.validate()?;
    let t = dataset.n_samples();
    let mut jobs = Vec::new();
    for variant in InitVariant::ALL {
        for trial in 0..tc.trials {
            jobs.push((variant, trial));
        }
    }
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(variant, trial)| {
            let split = split_dataset(
                dataset.n_series(),
                tc.validation_fraction,
                tc.seed,
                trial as u64,
            )?;
            let model_seed = crate::rng::substream_seed(
                tc.seed,
                &format!("model-{}", variant.label()),
                trial as u64,
            );
            let cfg = variant.needs_config().then_some(config);
            let mut model = build_model(cfg, variant, t, &DEFAULT_HIDDEN, model_seed)?;
            let trial_tc = TrainConfig {
                seed: crate::rng::substream_seed(tc.seed, "trial", trial as u64),
                ..tc.clone()
            };
            train_model(&mut model, dataset, &split, &trial_tc)
        })
        .collect::<Result<_>>()?;

    let mut variants = Vec::new();
    for (vi, variant) in InitVariant::ALL.into_iter().enumerate() {
        let trials: Vec<TrialResult> =
            results[vi * tc.trials..(vi + 1) * tc.trials].to_vec();
        let (mean_train, std_train) =
            mean_std(&trials.iter().map(|t| t.final_train_mse).collect::<Vec<_>>());
        let (mean_test, std_test) =
            mean_std(&trials.iter().map(|t| t.final_test_mse).collect::<Vec<_>>());
        let (mean_init, _) =
            mean_std(&trials.iter().map(|t| t.initial_loss).collect::<Vec<_>>());
        let (mean_disp, _) = mean_std(
            &trials
                .iter()
                .map(|t| t.final_displacement)
                .collect::<Vec<_>>(),
        );
        let best = trials
            .iter()
            .min_by(|a, b| a.final_test_mse.partial_cmp(&b.final_test_mse).unwrap())
            .unwrap();
        variants.push(VariantSummary {
            variant,
            label: variant.label().to_string(),
            param_count: best.param_count,
            mean_train_mse: mean_train,
            std_train_mse: std_train,
            mean_test_mse: mean_test,
            std_test_mse: std_test,
            mean_initial_loss: mean_init,
            mean_displacement: mean_disp,
            best_trajectory: best.trajectory.clone(),
            trials,
        });
    }
    Ok(ComparisonReport {
        schema_version: 1,
        n_trials: tc.trials,
        variants,
    })
}
