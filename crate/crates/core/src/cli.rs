//! Command-line surface: generate data, analyze priors, verify the trend
//! concentration bound, and train/compare the four initialization variants.
//!
//! All randomness flows from one `--seed` through named substreams, so every
//! command is byte-reproducible under fixed flags regardless of `--jobs`
//! (wall-clock fields in training reports are the only nondeterministic
//! values). Output files are written atomically (temp file + rename).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::{generate_synthetic, load_csv, save_csv, write_atomic};
use crate::error::{Error, Result};
use crate::model::InitVariant;
use crate::priors::{config_from_json, config_to_json, derive_config, PriorConfig};
use crate::spectral::average_periodogram;
use crate::train::{run_comparison, split_dataset, train_model, ComparisonReport, TrainConfig, TrialResult};
use crate::trend::{
    min_window, verify_bounds_matrix, BoundCell, DEFAULT_MC_DELTAS, DEFAULT_MC_NS,
    DEFAULT_MC_SIGMAS,
};

/// Seasonal/trend prior extraction and informed Bag-of-Functions training.
#[derive(Debug, Parser)]
#[command(name = "bof", version, disable_help_subcommand = true)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic benchmark dataset (CSV + sidecar metadata).
    Generate(GenerateArgs),
    /// Extract spectral/trend priors from a dataset into a configuration.
    Analyze(AnalyzeArgs),
    /// Monte Carlo verification of the slope concentration bound.
    VerifyBounds(VerifyBoundsArgs),
    /// Train one initialization variant over several trials.
    Train(TrainArgs),
    /// Paired four-variant comparison (BoF, H-BoF, I-BoF, IT-BoF).
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of series.
    #[arg(long)]
    n: usize,
    /// Samples per series.
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Additive noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Output CSV path (sidecar JSON written next to it).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Relative spectral power threshold.
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    /// Slope accuracy target.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Slope confidence level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output prior-configuration JSON; the averaged periodogram CSV is
    /// written next to it with a `.periodogram.csv` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyBoundsArgs {
    /// Monte Carlo trials per matrix cell.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (falls back to BOFPRIOR_JOBS, then 1).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output per-cell CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Prior configuration JSON (required for i-bof / it-bof).
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of: bof | h-bof | i-bof | it-bof.
    #[arg(long)]
    variant: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Learning rate η.
    #[arg(long, default_value_t = 1e-3)]
    eta: f64,
    /// Mini-batch size B.
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output report JSON; the best trial's trajectory CSV is written next
    /// to it with a `.trajectory.csv` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    /// Prior configuration JSON (informed variants).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    eta: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output comparison JSON; per-variant best trajectories are written
    /// next to it as `<stem>.<variant>.trajectory.csv`.
    #[arg(long)]
    out: PathBuf,
}

/// Entry point for the binary: parses arguments, runs, maps errors to the
/// exit-code contract (1 usage, 2 data/format, 3 numerical).
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::VerifyBounds(a) => cmd_verify_bounds(a),
        Command::Train(a) => cmd_train(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Resolve `--jobs`, falling back to `BOFPRIOR_JOBS`, then 1.
fn resolve_jobs(flag: Option<usize>) -> Result<usize> {
    let jobs = match flag {
        Some(j) => j,
        None => match std::env::var("BOFPRIOR_JOBS") {
            Ok(v) => v
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("BOFPRIOR_JOBS={v:?} is not a number")))?,
            Err(_) => 1,
        },
    };
    if jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be >= 1".into()));
    }
    Ok(jobs)
}

/// Run `f` on a dedicated rayon pool with `jobs` threads.
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn unix_timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// `path` with an extra suffix appended to the file stem, e.g.
/// `priors.json` → `priors.periodogram.csv`.
fn derived_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let dataset = generate_synthetic(a.n, a.t, a.seed, a.noise)?;
    save_csv(&dataset, &a.out)?;
    println!(
        "wrote {} ({} series x {} samples, seed {})",
        a.out.display(),
        a.n,
        a.t,
        a.seed
    );
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let dataset = load_csv(&a.data)?;
    let config = derive_config(&dataset, a.tau, a.delta, a.alpha)?;
    let periodogram = average_periodogram(&dataset)?;

    write_atomic(&a.out, config_to_json(&config).as_bytes())?;
    let pg_path = derived_path(&a.out, "periodogram.csv");
    write_atomic(&pg_path, periodogram.to_csv().as_bytes())?;

    println!("mode  freq[c/w]  amplitude  phase    share");
    for (i, (mode, stats)) in config.modes.iter().zip(&config.seasonal_stats).enumerate() {
        println!(
            "{:>4}  {:>9.3}  {:>9.3}  {:>6.3}  {:>6.3}",
            i, mode.freq, stats.amplitude.mean, stats.phase.mean, mode.power_share
        );
    }
    for w in &config.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "depth={} rho={:.2} sigma_eps={:.3} n_opt={}",
        config.s, config.rho_spec, config.sigma_eps, config.n_in
    );
    println!("wrote {} and {}", a.out.display(), pg_path.display());
    Ok(())
}

fn bounds_csv(cells: &[BoundCell]) -> String {
    let mut out = String::from("n,sigma,delta,trials,bound,empirical,std_err,var_ratio\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.n, c.sigma, c.delta, c.trials, c.bound, c.empirical, c.std_err, c.var_ratio
        ));
    }
    out
}

fn cmd_verify_bounds(a: VerifyBoundsArgs) -> Result<()> {
    let jobs = resolve_jobs(a.jobs)?;
    let cells = with_pool(jobs, || {
        verify_bounds_matrix(
            &DEFAULT_MC_NS,
            &DEFAULT_MC_SIGMAS,
            &DEFAULT_MC_DELTAS,
            a.trials,
            a.seed,
        )
    })?;
    write_atomic(&a.out, bounds_csv(&cells).as_bytes())?;

    let mut violations = Vec::new();
    for c in &cells {
        let status = if c.holds() { "ok" } else { "VIOLATED" };
        println!(
            "n={:<3} sigma={:<4} delta={:<4} bound={:.4} empirical={:.4} var_ratio={:.3} {status}",
            c.n, c.sigma, c.delta, c.bound, c.empirical, c.var_ratio
        );
        if !c.holds() {
            violations.push(format!("n={} sigma={} delta={}", c.n, c.sigma, c.delta));
        }
    }
    println!(
        "sizing: sigma^2=1.0 delta=0.1 alpha=0.05 -> n={}",
        min_window(1.0, 0.1, 0.05)?
    );
    println!("wrote {}", a.out.display());
    if !violations.is_empty() {
        return Err(Error::Numerical(format!(
            "concentration bound violated beyond binomial slack in: {}",
            violations.join("; ")
        )));
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<PriorConfig> {
    let text = std::fs::read_to_string(path)?;
    let (config, warnings) = config_from_json(&text)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

/// Report written by `train`: one variant, several trials.
#[derive(Debug, Serialize)]
struct TrainReport {
    schema_version: u32,
    generated_at: u64,
    variant: String,
    trials: usize,
    param_count: usize,
    mean_test_mse: f64,
    mean_train_mse: f64,
    mean_displacement: f64,
    results: Vec<TrialResult>,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let variant = InitVariant::from_label(&a.variant)?;
    let dataset = load_csv(&a.data)?;
    let config = a.config.as_deref().map(load_config).transpose()?;
    if variant.needs_config() && config.is_none() {
        return Err(Error::InvalidArgument(format!(
            "variant {} requires --config",
            variant.label()
        )));
    }
    let tc = TrainConfig {
        learning_rate: a.eta,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        trials: a.trials,
        ..TrainConfig::default()
    };
    tc.validate()?;
    if a.trials == 0 {
        return Err(Error::InvalidArgument("--trials must be >= 1".into()));
    }

    let jobs = resolve_jobs(a.jobs)?;
    let results: Vec<TrialResult> = with_pool(jobs, || {
        use rayon::prelude::*;
        (0..tc.trials)
            .into_par_iter()
            .map(|trial| {
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
                let mut model = crate::model::build_model(
                    config.as_ref().filter(|_| variant.needs_config()),
                    variant,
                    dataset.n_samples(),
                    &crate::model::DEFAULT_HIDDEN,
                    model_seed,
                )?;
                let trial_tc = TrainConfig {
                    seed: crate::rng::substream_seed(tc.seed, "trial", trial as u64),
                    ..tc.clone()
                };
                train_model(&mut model, &dataset, &split, &trial_tc)
                    .map_err(|e| Error::Numerical(format!("trial {trial}: {e}")))
            })
            .collect()
    })?;

    let mean = |f: fn(&TrialResult) -> f64| -> f64 {
        results.iter().map(f).sum::<f64>() / results.len() as f64
    };
    let best = results
        .iter()
        .min_by(|x, y| x.final_test_mse.partial_cmp(&y.final_test_mse).unwrap())
        .expect("at least one trial");
    let traj_path = derived_path(&a.out, "trajectory.csv");
    write_atomic(&traj_path, best.trajectory.to_csv().as_bytes())?;

    let report = TrainReport {
        schema_version: 1,
        generated_at: unix_timestamp(),
        variant: variant.label().to_string(),
        trials: tc.trials,
        param_count: best.param_count,
        mean_test_mse: mean(|r| r.final_test_mse),
        mean_train_mse: mean(|r| r.final_train_mse),
        mean_displacement: mean(|r| r.final_displacement),
        results,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&a.out, json.as_bytes())?;

    println!(
        "{}: {} trials, params {}, test MSE {:.4}, displacement {:.5}",
        report.variant, report.trials, report.param_count, report.mean_test_mse, report.mean_displacement
    );
    println!("wrote {} and {}", a.out.display(), traj_path.display());
    Ok(())
}

/// Comparison report wrapper adding the generation timestamp.
#[derive(Debug, Serialize)]
struct CompareReport {
    generated_at: u64,
    #[serde(flatten)]
    report: ComparisonReport,
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let dataset = load_csv(&a.data)?;
    let config = load_config(&a.config)?;
    let tc = TrainConfig {
        learning_rate: a.eta,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        trials: a.trials,
        ..TrainConfig::default()
    };

    let jobs = resolve_jobs(a.jobs)?;
    let report = with_pool(jobs, || run_comparison(&dataset, &config, &tc))?;

    println!(
        "{:<7} {:>8}  {:>18}  {:>18}  {:>10}  {:>12}",
        "variant", "params", "train MSE", "test MSE", "init loss", "displacement"
    );
    for v in &report.variants {
        println!(
            "{:<7} {:>8}  {:>8.4} ± {:>6.4}  {:>8.4} ± {:>6.4}  {:>10.4}  {:>12.5}",
            v.label,
            v.param_count,
            v.mean_train_mse,
            v.std_train_mse,
            v.mean_test_mse,
            v.std_test_mse,
            v.mean_initial_loss,
            v.mean_displacement
        );
    }

    for v in &report.variants {
        let path = derived_path(&a.out, &format!("{}.trajectory.csv", v.label.to_lowercase()));
        write_atomic(&path, v.best_trajectory.to_csv().as_bytes())?;
    }
    let wrapped = CompareReport {
        generated_at: unix_timestamp(),
        report,
    };
    let json = serde_json::to_string_pretty(&wrapped).expect("report serializes");
    write_atomic(&a.out, json.as_bytes())?;
    println!("wrote {}", a.out.display());
    Ok(())
}
