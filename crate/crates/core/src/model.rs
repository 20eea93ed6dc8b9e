//! Stacked residual Bag-of-Functions network.
//!
//! Each stage pairs an MLP encoder with a short list of basis assignments:
//! the encoder maps the running residual to the parameters of those bases,
//! and the stage's decoded output is the closed-form sum of the basis
//! evaluations. Stages chain through residual subtraction, so the model's
//! reconstruction is the sum of the per-stage components.
//!
//! Four initialization variants are supported: the Kaiming-uniform default,
//! a heuristic role table for final-layer biases, and two informed variants
//! that draw final-layer biases from empirical dataset statistics — the
//! second additionally shrinking the trend encoder input to the minimal
//! window derived by the trend analysis.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basis::{eval_smooth, BasisFamily};
use crate::dataset::TimeGrid;
use crate::error::{Error, Result};
use crate::priors::{ParamStats, PriorConfig};
use crate::rng::substream;

/// Hidden-layer widths shared by every encoder.
pub const DEFAULT_HIDDEN: [usize; 1] = [512];

/// Seasonal stage count used when no configuration is supplied.
pub const DEFAULT_DEPTH: usize = 3;

/// Final-layer weight damping for the informed variants, so initial encoder
/// outputs concentrate near the bias values.
pub const INFORMED_WEIGHT_DAMPING: f64 = 0.5;

/// Fully connected encoder with rectifier hidden layers and identity output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    /// Input, hidden…, output widths.
    pub widths: Vec<usize>,
    /// Row-major `[out × in]` matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `acts[0]` is the input; `acts[l]` the post-activation of layer l.
    acts: Vec<Vec<f64>>,
}

/// Per-layer weight and bias gradients.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(widths: &[usize]) -> Result<Mlp> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument(format!(
                "MLP needs >= 2 nonzero layer widths, got {widths:?}"
            )));
        }
        let weights = widths
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = widths[1..].iter().map(|&w| vec![0.0; w]).collect();
        Ok(Mlp {
            widths: widths.to_vec(),
            weights,
            biases,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpCache> {
        if x.len() != self.widths[0] {
            return Err(Error::InvalidArgument(format!(
                "encoder expects input length {}, got {}",
                self.widths[0],
                x.len()
            )));
        }
        let last = self.n_layers() - 1;
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let n_in = self.widths[l];
            let prev = &acts[l];
            let mut out = self.biases[l].clone();
            for (o, out_o) in out.iter_mut().enumerate() {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut acc = 0.0;
                for (w, a) in row.iter().zip(prev) {
                    acc += w * a;
                }
                *out_o += acc;
                if l < last && *out_o < 0.0 {
                    *out_o = 0.0;
                }
            }
            acts.push(out);
        }
        Ok(MlpCache { acts })
    }

    /// Reverse-mode pass: returns parameter gradients and the gradient with
    /// respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64]) -> (MlpGrads, Vec<f64>) {
        let last = self.n_layers() - 1;
        let mut w_grads: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut b_grads: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut delta = grad_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            if l < last {
                // rectifier mask from the cached post-activation
                for (d, a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let prev = &cache.acts[l];
            let mut grad_in = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                b_grads[l][o] += d;
                let w_row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let g_row = &mut w_grads[l][o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    g_row[i] += d * prev[i];
                    grad_in[i] += d * w_row[i];
                }
            }
            delta = grad_in;
        }
        (
            MlpGrads {
                weights: w_grads,
                biases: b_grads,
            },
            delta,
        )
    }
}

/// What component a stage reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Seasonal,
    Trend,
    Event,
}

/// Which part of the running residual a stage encoder sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Full,
    Subsampled(Vec<usize>),
}

/// Stage description: component kind, basis assignments, encoder input mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub kind: StageKind,
    /// (family, multiplicity) pairs; the encoder output concatenates the
    /// parameter blocks in order.
    pub bases: Vec<(BasisFamily, usize)>,
    pub input: InputMode,
}

impl StageSpec {
    /// Encoder output width = total basis parameter count.
    pub fn latent_width(&self) -> usize {
        self.bases
            .iter()
            .map(|(f, m)| f.param_count() * m)
            .sum()
    }

    pub fn input_width(&self, t: usize) -> usize {
        match &self.input {
            InputMode::Full => t,
            InputMode::Subsampled(idx) => idx.len(),
        }
    }
}

/// Initialization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitVariant {
    /// Kaiming-uniform weights, zero biases.
    Default,
    /// Default weights plus hand-set final-layer bias distributions.
    Heuristic,
    /// Final-layer biases from dataset statistics; full trend input.
    Informed,
    /// Informed biases plus the minimal trend window input.
    InformedTrend,
}

impl InitVariant {
    pub const ALL: [InitVariant; 4] = [
        InitVariant::Default,
        InitVariant::Heuristic,
        InitVariant::Informed,
        InitVariant::InformedTrend,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            InitVariant::Default => "BoF",
            InitVariant::Heuristic => "H-BoF",
            InitVariant::Informed => "I-BoF",
            InitVariant::InformedTrend => "IT-BoF",
        }
    }

    pub fn from_label(label: &str) -> Result<InitVariant> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.label().eq_ignore_ascii_case(label))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {label:?}")))
    }

    pub fn needs_config(&self) -> bool {
        matches!(self, InitVariant::Informed | InitVariant::InformedTrend)
    }
}

/// One stage: spec plus its encoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage {
    pub spec: StageSpec,
    pub mlp: Mlp,
}

/// The stacked model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BofModel {
    pub grid: TimeGrid,
    pub stages: Vec<Stage>,
    pub variant: InitVariant,
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Sum of the per-stage components.
    pub reconstruction: Vec<f64>,
    /// Decoded component of each stage.
    pub components: Vec<Vec<f64>>,
    /// Latent (basis-parameter) vector of each stage.
    pub latents: Vec<Vec<f64>>,
    caches: Vec<MlpCache>,
}

/// Build the stage layout for a variant.
///
/// Default/Heuristic use a fixed depth of three seasonal stages; the informed
/// variants take the depth and (for the trend stage) the subsampling indices
/// from the supplied configuration. Every layout appends one trend stage
/// (constant + linear bases) and one event stage (gaussian basis).
pub fn build_architecture(
    config: Option<&PriorConfig>,
    variant: InitVariant,
    t: usize,
    hidden: &[usize],
) -> Result<BofModel> {
    if variant.needs_config() && config.is_none() {
        return Err(Error::Init(format!(
            "variant {} requires a prior configuration",
            variant.label()
        )));
    }
    let grid = TimeGrid::regular(t, None)?;
    let depth = match (variant.needs_config(), config) {
        (true, Some(c)) => c.s,
        _ => DEFAULT_DEPTH,
    };
    let trend_input = match (variant, config) {
        (InitVariant::InformedTrend, Some(c)) => {
            if c.trend_indices.iter().any(|&i| i >= t) {
                return Err(Error::Init(format!(
                    "trend index out of range for T={t}"
                )));
            }
            InputMode::Subsampled(c.trend_indices.clone())
        }
        _ => InputMode::Full,
    };

    let mut specs = Vec::new();
    for _ in 0..depth {
        specs.push(StageSpec {
            kind: StageKind::Seasonal,
            bases: vec![(BasisFamily::Cosine, 1)],
            input: InputMode::Full,
        });
    }
    specs.push(StageSpec {
        kind: StageKind::Trend,
        bases: vec![(BasisFamily::Const, 1), (BasisFamily::Linear, 1)],
        input: trend_input,
    });
    specs.push(StageSpec {
        kind: StageKind::Event,
        bases: vec![(BasisFamily::Gaussian, 1)],
        input: InputMode::Full,
    });

    let stages = specs
        .into_iter()
        .map(|spec| {
            let mut widths = vec![spec.input_width(t)];
            widths.extend_from_slice(hidden);
            widths.push(spec.latent_width());
            Ok(Stage {
                mlp: Mlp::zeros(&widths)?,
                spec,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BofModel {
        grid,
        stages,
        variant,
    })
}

/// Initialization role of one latent slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Amplitude,
    Frequency,
    Phase,
    Bias,
    Slope,
    Other,
}

/// Roles of a stage's latent slots, in encoder output order.
fn stage_roles(spec: &StageSpec) -> Vec<Role> {
    let mut roles = Vec::new();
    for &(family, mult) in &spec.bases {
        for _ in 0..mult {
            match (spec.kind, family) {
                (StageKind::Seasonal, _) => {
                    roles.extend([Role::Amplitude, Role::Frequency, Role::Phase])
                }
                (StageKind::Trend, BasisFamily::Const) => roles.push(Role::Bias),
                (StageKind::Trend, BasisFamily::Linear) => roles.push(Role::Slope),
                _ => {
                    roles.push(Role::Amplitude);
                    roles.extend(std::iter::repeat(Role::Other).take(family.param_count() - 1));
                }
            }
        }
    }
    roles
}

fn sample_normal(rng: &mut impl Rng, mean: f64, variance: f64) -> Result<f64> {
    let normal =
        Normal::new(mean, variance.max(0.0).sqrt()).map_err(|e| Error::Init(e.to_string()))?;
    Ok(normal.sample(rng))
}

/// Heuristic role table: hand-set bias distributions standing in for a
/// manually tuned scheme. Frequencies are angular (a₂ = 2πf).
fn heuristic_bias(rng: &mut impl Rng, role: Role) -> Result<f64> {
    use std::f64::consts::PI;
    match role {
        Role::Amplitude => sample_normal(rng, 1.0, 0.25),
        Role::Frequency => sample_normal(rng, 2.0 * PI * 5.0, (2.0 * PI) * (2.0 * PI)),
        _ => sample_normal(rng, 0.0, 1.0),
    }
}

fn informed_bias(
    rng: &mut impl Rng,
    role: Role,
    seasonal: Option<&crate::priors::ModePriors>,
    trend: &crate::priors::TrendPriors,
) -> Result<f64> {
    use std::f64::consts::PI;
    let from = |rng: &mut _, s: &ParamStats| sample_normal(rng, s.mean, s.variance);
    match (role, seasonal) {
        (Role::Amplitude, Some(m)) => from(rng, &m.amplitude),
        (Role::Frequency, Some(m)) => {
            // stats are in cycles; the basis argument is angular
            let f = from(rng, &m.frequency)?;
            Ok(2.0 * PI * f)
        }
        (Role::Phase, Some(m)) => from(rng, &m.phase),
        (Role::Bias, _) => from(rng, &trend.bias),
        (Role::Slope, _) => from(rng, &trend.slope),
        // event stage: start silent (zero amplitude ⇒ zero component)
        _ => Ok(0.0),
    }
}

/// Populate all parameters for the model's variant.
///
/// Weights are Kaiming-uniform `U(±√(6/fan_in))` everywhere; biases start at
/// zero. Heuristic/informed variants overwrite the final-layer biases from
/// their role distributions, and the informed variants additionally damp the
/// final-layer weights by γ so initial latents concentrate near the biases.
pub fn initialize(model: &mut BofModel, config: Option<&PriorConfig>, seed: u64) -> Result<()> {
    let variant = model.variant;
    if variant.needs_config() && config.is_none() {
        return Err(Error::Init(format!(
            "variant {} requires a prior configuration",
            variant.label()
        )));
    }
    if let (true, Some(c)) = (variant.needs_config(), config) {
        let depth = model
            .stages
            .iter()
            .filter(|s| s.spec.kind == StageKind::Seasonal)
            .count();
        if depth != c.s {
            return Err(Error::Init(format!(
                "configuration has S={} but the model has {depth} seasonal stages",
                c.s
            )));
        }
    }

    // bias-based variants damp the final-layer weights so initial latents
    // concentrate near the drawn biases
    let gamma = if variant == InitVariant::Default {
        1.0
    } else {
        INFORMED_WEIGHT_DAMPING
    };
    let mut seasonal_seen = 0usize;
    for (si, stage) in model.stages.iter_mut().enumerate() {
        let last = stage.mlp.n_layers() - 1;
        for l in 0..stage.mlp.n_layers() {
            let mut rng = substream(seed, "init-weights", (si * 64 + l) as u64);
            let fan_in = stage.mlp.widths[l] as f64;
            let bound = (6.0 / fan_in).sqrt();
            let scale = if l == last { gamma } else { 1.0 };
            for w in &mut stage.mlp.weights[l] {
                *w = scale * (rng.gen::<f64>() * 2.0 - 1.0) * bound;
            }
            for b in &mut stage.mlp.biases[l] {
                *b = 0.0;
            }
        }
        let roles = stage_roles(&stage.spec);
        let mut rng = substream(seed, "init-bias", si as u64);
        match variant {
            InitVariant::Default => {}
            InitVariant::Heuristic => {
                for (b, &role) in stage.mlp.biases[last].iter_mut().zip(&roles) {
                    *b = heuristic_bias(&mut rng, role)?;
                }
            }
            InitVariant::Informed | InitVariant::InformedTrend => {
                let c = config.unwrap();
                let seasonal = if stage.spec.kind == StageKind::Seasonal {
                    let m = c.seasonal_stats.get(seasonal_seen).ok_or_else(|| {
                        Error::Init("missing seasonal statistics for stage".into())
                    })?;
                    Some(m)
                } else {
                    None
                };
                for (b, &role) in stage.mlp.biases[last].iter_mut().zip(&roles) {
                    *b = informed_bias(&mut rng, role, seasonal, &c.trend_stats)?;
                }
                // the priors carry no event information: start the event head
                // exactly neutral so the stage only wakes up on demand
                if stage.spec.kind == StageKind::Event {
                    for w in &mut stage.mlp.weights[last] {
                        *w = 0.0;
                    }
                }
            }
        }
        if stage.spec.kind == StageKind::Seasonal {
            seasonal_seen += 1;
        }
    }
    Ok(())
}

/// Convenience: build and initialize in one call.
pub fn build_model(
    config: Option<&PriorConfig>,
    variant: InitVariant,
    t: usize,
    hidden: &[usize],
    seed: u64,
) -> Result<BofModel> {
    let mut model = build_architecture(config, variant, t, hidden)?;
    initialize(&mut model, config, seed)?;
    Ok(model)
}

impl BofModel {
    pub fn n_samples(&self) -> usize {
        self.grid.len()
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.mlp.param_count()).sum()
    }

    /// Flatten every parameter in a fixed order (stage, layer, weights then
    /// biases).
    pub fn snapshot(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for stage in &self.stages {
            for l in 0..stage.mlp.n_layers() {
                out.extend_from_slice(&stage.mlp.weights[l]);
                out.extend_from_slice(&stage.mlp.biases[l]);
            }
        }
        out
    }

    /// Overwrite parameters from a flat vector in snapshot order.
    pub fn restore(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut i = 0;
        for stage in &mut self.stages {
            for l in 0..stage.mlp.n_layers() {
                let wn = stage.mlp.weights[l].len();
                stage.mlp.weights[l].copy_from_slice(&flat[i..i + wn]);
                i += wn;
                let bn = stage.mlp.biases[l].len();
                stage.mlp.biases[l].copy_from_slice(&flat[i..i + bn]);
                i += bn;
            }
        }
        Ok(())
    }

    /// Mean absolute per-parameter deviation from an initialization snapshot.
    pub fn displacement(&self, snapshot: &[f64]) -> Result<f64> {
        if snapshot.len() != self.param_count() {
            return Err(Error::InvalidArgument(
                "snapshot length does not match the model".into(),
            ));
        }
        let current = self.snapshot();
        let sum: f64 = current
            .iter()
            .zip(snapshot)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(sum / snapshot.len() as f64)
    }

    /// Residual-chained forward pass over one series.
    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let t = self.n_samples();
        if x.len() != t {
            return Err(Error::InvalidArgument(format!(
                "expected series of length {t}, got {}",
                x.len()
            )));
        }
        let mut residual = x.to_vec();
        let mut components = Vec::with_capacity(self.stages.len());
        let mut latents = Vec::with_capacity(self.stages.len());
        let mut caches = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let input: Vec<f64> = match &stage.spec.input {
                InputMode::Full => residual.clone(),
                InputMode::Subsampled(idx) => idx.iter().map(|&i| residual[i]).collect(),
            };
            let cache = stage.mlp.forward(&input)?;
            let z = cache.acts.last().unwrap().clone();
            let mut component = vec![0.0; t];
            let mut offset = 0;
            for &(family, mult) in &stage.spec.bases {
                let p = family.param_count();
                for _ in 0..mult {
                    let ev = eval_smooth(family, &z[offset..offset + p], &self.grid)?;
                    for (c, v) in component.iter_mut().zip(&ev.values) {
                        *c += v;
                    }
                    offset += p;
                }
            }
            for (r, c) in residual.iter_mut().zip(&component) {
                *r -= c;
            }
            components.push(component);
            latents.push(z);
            caches.push(cache);
        }
        let mut reconstruction = vec![0.0; t];
        for component in &components {
            for (r, c) in reconstruction.iter_mut().zip(component) {
                *r += c;
            }
        }
        Ok(Forward {
            reconstruction,
            components,
            latents,
            caches,
        })
    }

    /// Reverse-mode gradients of a loss given `∂L/∂x̂`.
    ///
    /// Each stage's component reaches the loss directly through the
    /// reconstruction sum and indirectly (with opposite sign) through the
    /// residuals feeding every later encoder; the adjoint accumulates the
    /// latter while walking the stages backwards.
    pub fn backward(&self, fwd: &Forward, grad_recon: &[f64]) -> Result<Vec<MlpGrads>> {
        let t = self.n_samples();
        if grad_recon.len() != t {
            return Err(Error::InvalidArgument(format!(
                "expected gradient of length {t}, got {}",
                grad_recon.len()
            )));
        }
        if fwd.caches.len() != self.stages.len() {
            return Err(Error::InvalidArgument(
                "forward cache does not match the model".into(),
            ));
        }
        let mut grads: Vec<Option<MlpGrads>> = vec![None; self.stages.len()];
        // sum of ∂L/∂r_{s-1} over all later encoders
        let mut acc = vec![0.0; t];
        for (si, stage) in self.stages.iter().enumerate().rev() {
            let z = &fwd.latents[si];
            let grad_component: Vec<f64> = grad_recon
                .iter()
                .zip(&acc)
                .map(|(g, a)| g - a)
                .collect();
            // chain through the basis jacobians to the latent vector
            let mut grad_z = vec![0.0; z.len()];
            let mut offset = 0;
            for &(family, mult) in &stage.spec.bases {
                let p = family.param_count();
                for _ in 0..mult {
                    let ev = eval_smooth(family, &z[offset..offset + p], &self.grid)?;
                    for (k, row) in ev.jacobian.iter().enumerate() {
                        grad_z[offset + k] = row
                            .iter()
                            .zip(&grad_component)
                            .map(|(j, g)| j * g)
                            .sum();
                    }
                    offset += p;
                }
            }
            let (mlp_grads, grad_input) = stage.mlp.backward(&fwd.caches[si], &grad_z);
            match &stage.spec.input {
                InputMode::Full => {
                    for (a, g) in acc.iter_mut().zip(&grad_input) {
                        *a += g;
                    }
                }
                InputMode::Subsampled(idx) => {
                    for (&i, g) in idx.iter().zip(&grad_input) {
                        acc[i] += g;
                    }
                }
            }
            grads[si] = Some(mlp_grads);
        }
        Ok(grads.into_iter().map(Option::unwrap).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SerializedModel {
            schema_version: 1,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<BofModel> {
        let doc: SerializedModel =
            serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.schema_version != 1 {
            return Err(Error::Parse(format!(
                "unsupported model schema_version {}",
                doc.schema_version
            )));
        }
        Ok(doc.model)
    }
}

#[derive(Serialize, Deserialize)]
struct SerializedModel {
    schema_version: u32,
    model: BofModel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_synthetic;
    use crate::priors::derive_config;
    use std::f64::consts::PI;

    fn tiny_config() -> PriorConfig {
        let ds = generate_synthetic(20, 64, 9, 0.01).unwrap();
        derive_config(&ds, 0.2, 0.2, 0.05).unwrap()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let model = build_architecture(None, InitVariant::Default, 32, &[8]).unwrap();
        let fwd = model.forward(&vec![1.0; 32]).unwrap();
        assert!(fwd.reconstruction.iter().all(|&v| v == 0.0));
        assert!(fwd.components.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_forced_decoder_identity() {
        // zero weights, bias (2, 2π·5, 0) on a single sine stage
        let grid = TimeGrid::regular(50, None).unwrap();
        let spec = StageSpec {
            kind: StageKind::Seasonal,
            bases: vec![(BasisFamily::Sine, 1)],
            input: InputMode::Full,
        };
        let mut mlp = Mlp::zeros(&[50, 8, 3]).unwrap();
        mlp.biases[1] = vec![2.0, 2.0 * PI * 5.0, 0.0];
        let model = BofModel {
            grid: grid.clone(),
            stages: vec![Stage { spec, mlp }],
            variant: InitVariant::Default,
        };
        let fwd = model.forward(&vec![0.3; 50]).unwrap();
        for (v, &t) in fwd.reconstruction.iter().zip(grid.positions()) {
            assert!((v - 2.0 * (2.0 * PI * 5.0 * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn component_sum_and_telescoping() {
        let cfg = tiny_config();
        let model =
            build_model(Some(&cfg), InitVariant::InformedTrend, 64, &[16], 3).unwrap();
        let ds = generate_synthetic(1, 64, 17, 0.1).unwrap();
        let x = &ds.series[0].values;
        let fwd = model.forward(x).unwrap();
        // reconstruction is exactly the component sum
        let mut sum = vec![0.0; 64];
        for c in &fwd.components {
            for (s, v) in sum.iter_mut().zip(c) {
                *s += v;
            }
        }
        for (a, b) in sum.iter().zip(&fwd.reconstruction) {
            assert_eq!(a, b);
        }
        // the final residual telescopes: x − x̂_1 − … − x̂_S
        let mut residual = x.clone();
        for c in &fwd.components {
            for (r, v) in residual.iter_mut().zip(c) {
                *r -= v;
            }
        }
        for (j, r) in residual.iter().enumerate() {
            assert!((x[j] - fwd.reconstruction[j] - r).abs() < 1e-12);
        }
    }

    #[test]
    fn default_builds_without_config() {
        let model = build_model(None, InitVariant::Default, 100, &DEFAULT_HIDDEN, 1).unwrap();
        let seasonal = model
            .stages
            .iter()
            .filter(|s| s.spec.kind == StageKind::Seasonal)
            .count();
        assert_eq!(seasonal, DEFAULT_DEPTH);
        assert_eq!(model.stages.len(), DEFAULT_DEPTH + 2);
        assert!(build_model(None, InitVariant::Informed, 100, &[8], 1).is_err());
    }

    #[test]
    fn heuristic_differs_only_in_final_biases() {
        let a = build_model(None, InitVariant::Default, 40, &[8], 5).unwrap();
        let mut b = build_architecture(None, InitVariant::Heuristic, 40, &[8]).unwrap();
        initialize(&mut b, None, 5).unwrap();
        for (sa, sb) in a.stages.iter().zip(&b.stages) {
            let last = sa.mlp.n_layers() - 1;
            for l in 0..last {
                assert_eq!(sa.mlp.weights[l], sb.mlp.weights[l]);
                assert_eq!(sa.mlp.biases[l], sb.mlp.biases[l]);
            }
            // final layer: damped weights plus role-drawn biases
            for (wa, wb) in sa.mlp.weights[last].iter().zip(&sb.mlp.weights[last]) {
                assert!((wb - INFORMED_WEIGHT_DAMPING * wa).abs() < 1e-15);
            }
            assert!(sa.mlp.biases[last].iter().all(|&v| v == 0.0));
            assert!(sb.mlp.biases[last].iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn informed_forward_is_bias_dominated() {
        let mut cfg = tiny_config();
        // force a zero-variance 5-cycle frequency prior on stage 0
        cfg.seasonal_stats[0].frequency.mean = 5.0;
        cfg.seasonal_stats[0].frequency.variance = 0.0;
        let model = build_model(Some(&cfg), InitVariant::Informed, 64, &[16], 2).unwrap();
        let ds = generate_synthetic(3, 64, 23, 0.01).unwrap();
        for s in &ds.series {
            let fwd = model.forward(&s.values).unwrap();
            let a2 = fwd.latents[0][1];
            // spread scales with the final-layer damping factor
            assert!(
                (a2 - 2.0 * PI * 5.0).abs() < 15.0 * INFORMED_WEIGHT_DAMPING,
                "frequency latent {a2} strayed from 2π·5"
            );
        }
    }

    #[test]
    fn informed_event_head_starts_neutral() {
        let cfg = tiny_config();
        for variant in [InitVariant::Informed, InitVariant::InformedTrend] {
            let model = build_model(Some(&cfg), variant, 64, &[16], 3).unwrap();
            let event = model
                .stages
                .iter()
                .find(|s| s.spec.kind == StageKind::Event)
                .unwrap();
            let last = event.mlp.n_layers() - 1;
            assert!(event.mlp.weights[last].iter().all(|&w| w == 0.0));
            assert!(event.mlp.biases[last].iter().all(|&b| b == 0.0));
            // hidden layers stay live so the stage can wake up in training
            assert!(event.mlp.weights[0].iter().any(|&w| w != 0.0));
        }
    }

    #[test]
    fn initialization_is_deterministic() {
        let cfg = tiny_config();
        for variant in InitVariant::ALL {
            let c = variant.needs_config().then_some(&cfg);
            let a = build_model(c, variant, 64, &[16], 77).unwrap();
            let b = build_model(c, variant, 64, &[16], 77).unwrap();
            assert_eq!(a.snapshot(), b.snapshot(), "{}", variant.label());
            let d = build_model(c, variant, 64, &[16], 78).unwrap();
            assert_ne!(a.snapshot(), d.snapshot());
        }
    }

    #[test]
    fn informed_bias_statistics_match_priors() {
        let cfg = tiny_config();
        let stats = &cfg.seasonal_stats[0].amplitude;
        let trials = 2000;
        let mut values = Vec::with_capacity(trials);
        for seed in 0..trials {
            let model = build_model(Some(&cfg), InitVariant::Informed, 64, &[8], seed as u64)
                .unwrap();
            let last = model.stages[0].mlp.n_layers() - 1;
            values.push(model.stages[0].mlp.biases[last][0]);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let se_mean = (stats.variance / n).sqrt();
        assert!(
            (mean - stats.mean).abs() < 3.0 * se_mean,
            "mean {mean} vs prior {} (se {se_mean})",
            stats.mean
        );
        let se_var = stats.variance * (2.0 / n).sqrt();
        assert!((var - stats.variance).abs() < 3.0 * se_var);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // subsampled trend input + every stage kind on a tiny model
        let small_cfg = {
            let mut c = tiny_config();
            c.n_in = 5;
            c.trend_indices = vec![0, 4, 8, 11, 15];
            c
        };
        let mut model =
            build_model(Some(&small_cfg), InitVariant::InformedTrend, 16, &[8], 13).unwrap();
        let t = 16;
        let x: Vec<f64> = (0..t).map(|j| (j as f64 * 0.7).sin() + 0.1 * j as f64).collect();
        let g: Vec<f64> = (0..t).map(|j| ((j * 13 + 5) % 7) as f64 * 0.3 - 0.9).collect();

        let fwd = model.forward(&x).unwrap();
        let grads = model.backward(&fwd, &g).unwrap();
        let mut flat_grads = Vec::new();
        for mg in &grads {
            for l in 0..mg.weights.len() {
                flat_grads.extend_from_slice(&mg.weights[l]);
                flat_grads.extend_from_slice(&mg.biases[l]);
            }
        }

        let theta = model.snapshot();
        let h = 1e-5;
        let loss = |m: &BofModel| -> f64 {
            let f = m.forward(&x).unwrap();
            f.reconstruction.iter().zip(&g).map(|(r, gg)| r * gg).sum()
        };
        let mut max_rel = 0.0_f64;
        for p in (0..theta.len()).step_by(7) {
            let mut tp = theta.clone();
            tp[p] += h;
            model.restore(&tp).unwrap();
            let lp = loss(&model);
            tp[p] -= 2.0 * h;
            model.restore(&tp).unwrap();
            let lm = loss(&model);
            let fd = (lp - lm) / (2.0 * h);
            let scale = flat_grads[p].abs().max(fd.abs()).max(1.0);
            max_rel = max_rel.max((flat_grads[p] - fd).abs() / scale);
        }
        model.restore(&theta).unwrap();
        assert!(max_rel < 1e-4, "max relative gradient error {max_rel}");
    }

    #[test]
    fn zero_upstream_gradient_is_zero() {
        let model = build_model(None, InitVariant::Heuristic, 32, &[8], 3).unwrap();
        let x = vec![0.5; 32];
        let fwd = model.forward(&x).unwrap();
        let grads = model.backward(&fwd, &vec![0.0; 32]).unwrap();
        for mg in grads {
            assert!(mg.weights.iter().flatten().all(|&v| v == 0.0));
            assert!(mg.biases.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_stage_amplitude_bias_gradient() {
        // x̂ = a₁·sin(ωt + φ): ∂L/∂(a₁ bias) = Σ_t g_t·sin(ωt + φ)
        let grid = TimeGrid::regular(20, None).unwrap();
        let spec = StageSpec {
            kind: StageKind::Seasonal,
            bases: vec![(BasisFamily::Sine, 1)],
            input: InputMode::Full,
        };
        let mut mlp = Mlp::zeros(&[20, 4, 3]).unwrap();
        mlp.biases[1] = vec![1.3, 4.0, 0.2];
        let model = BofModel {
            grid: grid.clone(),
            stages: vec![Stage { spec, mlp }],
            variant: InitVariant::Default,
        };
        let x = vec![0.0; 20];
        let g: Vec<f64> = (0..20).map(|j| 0.1 * j as f64 - 0.7).collect();
        let fwd = model.forward(&x).unwrap();
        let grads = model.backward(&fwd, &g).unwrap();
        let expected: f64 = grid
            .positions()
            .iter()
            .zip(&g)
            .map(|(&t, gg)| (4.0 * t + 0.2).sin() * gg)
            .sum();
        assert!((grads[0].biases[1][0] - expected).abs() < 1e-12);
    }

    #[test]
    fn displacement_metric() {
        let model = build_model(None, InitVariant::Default, 32, &[8], 3).unwrap();
        let snap = model.snapshot();
        assert_eq!(model.displacement(&snap).unwrap(), 0.0);
        let mut moved = model.clone();
        let shifted: Vec<f64> = snap.iter().map(|v| v + 0.5).collect();
        moved.restore(&shifted).unwrap();
        assert!((moved.displacement(&snap).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trend_window_shrinks_parameters() {
        let ds = generate_synthetic(100, 100, 42, 0.01).unwrap();
        let cfg = derive_config(&ds, 0.2, 0.2, 0.05).unwrap();
        let informed =
            build_model(Some(&cfg), InitVariant::Informed, 100, &DEFAULT_HIDDEN, 1).unwrap();
        let trend =
            build_model(Some(&cfg), InitVariant::InformedTrend, 100, &DEFAULT_HIDDEN, 1).unwrap();
        let (pi, pt) = (informed.param_count(), trend.param_count());
        assert!(pt < pi);
        let reduction = 1.0 - pt as f64 / pi as f64;
        assert!(reduction >= 0.15, "reduction {reduction}");
    }

    #[test]
    fn model_json_round_trip() {
        let cfg = tiny_config();
        let model = build_model(Some(&cfg), InitVariant::Informed, 64, &[8], 21).unwrap();
        let back = BofModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model.snapshot(), back.snapshot());
        assert_eq!(model.stages.len(), back.stages.len());
        let x = vec![0.2; 64];
        assert_eq!(
            model.forward(&x).unwrap().reconstruction,
            back.forward(&x).unwrap().reconstruction
        );
    }
}
