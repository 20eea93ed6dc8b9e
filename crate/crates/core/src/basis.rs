//! Analytic basis-function library: closed-form values and exact parameter
//! jacobians for every family used by the decoder stages.
//!
//! Each family maps a short parameter vector `(a₁, …)` and a time grid to a
//! curve. `eval` gives the literal definition (hard step, true power shift);
//! `eval_smooth` swaps in the differentiable training surrogates — a sigmoid
//! step of fixed sharpness and a softplus re-parameterized power shift.

use crate::dataset::TimeGrid;
use crate::error::{Error, Result};

/// Sharpness of the sigmoid surrogate for the hard step (grid units).
pub const STEP_SHARPNESS: f64 = 50.0;

/// Component category a family belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Seasonality,
    Trend,
    Event,
}

/// The fourteen analytic families.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// a₁·sin(a₂t + a₃)
    Sine,
    /// a₁·cos(a₂t + a₃)
    Cosine,
    /// a₁·sinc(a₂t + a₃)
    Sinc,
    /// a₁
    Const,
    /// a₁t
    Linear,
    /// a₁t² + a₂t
    Quadratic,
    /// a₁t³ + a₂t² + a₃t
    Cubic,
    /// a₁(1 − e^{t·a₂})
    SaturatingExp,
    /// a₁(t + a₂)^{a₃}
    Power,
    /// a₁·log(t + a₂)
    Log,
    /// a₁·step(t, a₂)
    Step,
    /// a₁·e^{−a₂(t − a₃)²}
    Gaussian,
    /// a₁·tanh(a₂(t − a₃))
    TanhEvent,
    /// a₁·sig(a₂(t − a₃))
    SigmoidEvent,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 14] = [
        BasisFamily::Sine,
        BasisFamily::Cosine,
        BasisFamily::Sinc,
        BasisFamily::Const,
        BasisFamily::Linear,
        BasisFamily::Quadratic,
        BasisFamily::Cubic,
        BasisFamily::SaturatingExp,
        BasisFamily::Power,
        BasisFamily::Log,
        BasisFamily::Step,
        BasisFamily::Gaussian,
        BasisFamily::TanhEvent,
        BasisFamily::SigmoidEvent,
    ];

    /// Stable string id used in serialized model specifications.
    pub fn id(&self) -> &'static str {
        match self {
            BasisFamily::Sine => "sine",
            BasisFamily::Cosine => "cosine",
            BasisFamily::Sinc => "sinc",
            BasisFamily::Const => "const",
            BasisFamily::Linear => "linear",
            BasisFamily::Quadratic => "quadratic",
            BasisFamily::Cubic => "cubic",
            BasisFamily::SaturatingExp => "saturating_exp",
            BasisFamily::Power => "power",
            BasisFamily::Log => "log",
            BasisFamily::Step => "step",
            BasisFamily::Gaussian => "gaussian",
            BasisFamily::TanhEvent => "tanh_event",
            BasisFamily::SigmoidEvent => "sigmoid_event",
        }
    }

    pub fn from_id(id: &str) -> Result<BasisFamily> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.id() == id)
            .ok_or_else(|| Error::Parse(format!("unknown basis family id {id:?}")))
    }

    pub fn param_count(&self) -> usize {
        match self {
            BasisFamily::Const | BasisFamily::Linear => 1,
            BasisFamily::Quadratic
            | BasisFamily::SaturatingExp
            | BasisFamily::Log
            | BasisFamily::Step => 2,
            _ => 3,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            BasisFamily::Sine | BasisFamily::Cosine | BasisFamily::Sinc => Category::Seasonality,
            BasisFamily::Const
            | BasisFamily::Linear
            | BasisFamily::Quadratic
            | BasisFamily::Cubic
            | BasisFamily::SaturatingExp
            | BasisFamily::Power
            | BasisFamily::Log => Category::Trend,
            BasisFamily::Step
            | BasisFamily::Gaussian
            | BasisFamily::TanhEvent
            | BasisFamily::SigmoidEvent => Category::Event,
        }
    }
}

/// Basis values over a grid plus the per-parameter partial derivatives.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub values: Vec<f64>,
    /// `jacobian[p][j] = ∂φ(t_j)/∂a_{p+1}`.
    pub jacobian: Vec<Vec<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// sinc(x) = sin(x)/x with the removable singularity patched; returns
/// (value, derivative). Near zero the truncated series keeps both smooth.
fn sinc_vd(x: f64) -> (f64, f64) {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        (1.0 - x2 / 6.0 + x2 * x2 / 120.0, -x / 3.0 + x * x2 / 30.0)
    } else {
        let s = x.sin() / x;
        (s, (x.cos() - s) / x)
    }
}

/// Sigmoid surrogate of the hard step: value and gradient w.r.t. the
/// threshold `a₂`.
pub fn smooth_step(t: f64, a2: f64, sharpness: f64) -> (f64, f64) {
    let s = sigmoid(sharpness * (t - a2));
    (s, -sharpness * s * (1.0 - s))
}

/// Evaluate `family` with the literal Table definitions.
pub fn eval(family: BasisFamily, params: &[f64], grid: &TimeGrid) -> Result<BasisEval> {
    eval_inner(family, params, grid, false)
}

/// Evaluate with the differentiable training surrogates (smooth step,
/// softplus-shifted power base).
pub fn eval_smooth(family: BasisFamily, params: &[f64], grid: &TimeGrid) -> Result<BasisEval> {
    eval_inner(family, params, grid, true)
}

fn eval_inner(
    family: BasisFamily,
    params: &[f64],
    grid: &TimeGrid,
    smooth: bool,
) -> Result<BasisEval> {
    if params.len() != family.param_count() {
        return Err(Error::InvalidArgument(format!(
            "{} expects {} parameters, got {}",
            family.id(),
            family.param_count(),
            params.len()
        )));
    }
    let ts = grid.positions();
    let n = ts.len();
    let p = family.param_count();
    let mut values = vec![0.0; n];
    let mut jacobian = vec![vec![0.0; n]; p];

    for (j, &t) in ts.iter().enumerate() {
        let (v, grads) = point(family, params, t, smooth)?;
        values[j] = v;
        for (row, g) in jacobian.iter_mut().zip(grads.iter().take(p)) {
            row[j] = *g;
        }
    }
    Ok(BasisEval { values, jacobian })
}

/// Value and parameter gradient of one family at one time point.
fn point(family: BasisFamily, a: &[f64], t: f64, smooth: bool) -> Result<(f64, [f64; 3])> {
    let mut g = [0.0; 3];
    let v = match family {
        BasisFamily::Sine => {
            let u = a[1] * t + a[2];
            let (s, c) = u.sin_cos();
            g = [s, a[0] * t * c, a[0] * c];
            a[0] * s
        }
        BasisFamily::Cosine => {
            let u = a[1] * t + a[2];
            let (s, c) = u.sin_cos();
            g = [c, -a[0] * t * s, -a[0] * s];
            a[0] * c
        }
        BasisFamily::Sinc => {
            let u = a[1] * t + a[2];
            let (s, d) = sinc_vd(u);
            g = [s, a[0] * t * d, a[0] * d];
            a[0] * s
        }
        BasisFamily::Const => {
            g[0] = 1.0;
            a[0]
        }
        BasisFamily::Linear => {
            g[0] = t;
            a[0] * t
        }
        BasisFamily::Quadratic => {
            g = [t * t, t, 0.0];
            a[0] * t * t + a[1] * t
        }
        BasisFamily::Cubic => {
            g = [t * t * t, t * t, t];
            a[0] * t * t * t + a[1] * t * t + a[2] * t
        }
        BasisFamily::SaturatingExp => {
            let e = (t * a[1]).exp();
            g = [1.0 - e, -a[0] * t * e, 0.0];
            a[0] * (1.0 - e)
        }
        BasisFamily::Power => {
            let (base, dbase) = if smooth {
                (t + softplus(a[1]), sigmoid(a[1]))
            } else {
                (t + a[1], 1.0)
            };
            if base <= 0.0 && a[2].fract() != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "power basis needs t + a2 > 0 for non-integer a3 (t={t}, a2={}, a3={})",
                    a[1], a[2]
                )));
            }
            if base <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "power basis evaluated at non-positive base t + a2 = {base}"
                )));
            }
            let pw = base.powf(a[2]);
            g = [pw, a[0] * a[2] * base.powf(a[2] - 1.0) * dbase, a[0] * pw * base.ln()];
            a[0] * pw
        }
        BasisFamily::Log => {
            let base = t + a[1];
            if base <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "log basis needs t + a2 > 0, got {base}"
                )));
            }
            g = [base.ln(), a[0] / base, 0.0];
            a[0] * base.ln()
        }
        BasisFamily::Step => {
            if smooth {
                let (s, ds) = smooth_step(t, a[1], STEP_SHARPNESS);
                g = [s, a[0] * ds, 0.0];
                a[0] * s
            } else {
                let s = if t >= a[1] { 1.0 } else { 0.0 };
                g = [s, 0.0, 0.0];
                a[0] * s
            }
        }
        BasisFamily::Gaussian => {
            // training uses a softplus width so negative raw widths cannot
            // overflow the exponential
            let (width, dwidth) = if smooth {
                (softplus(a[1]), sigmoid(a[1]))
            } else {
                (a[1], 1.0)
            };
            let d = t - a[2];
            let e = (-width * d * d).exp();
            g = [e, -a[0] * d * d * e * dwidth, 2.0 * a[0] * width * d * e];
            a[0] * e
        }
        BasisFamily::TanhEvent => {
            let u = a[1] * (t - a[2]);
            let th = u.tanh();
            let sech2 = 1.0 - th * th;
            g = [th, a[0] * (t - a[2]) * sech2, -a[0] * a[1] * sech2];
            a[0] * th
        }
        BasisFamily::SigmoidEvent => {
            let s = sigmoid(a[1] * (t - a[2]));
            let ds = s * (1.0 - s);
            g = [s, a[0] * (t - a[2]) * ds, -a[0] * a[1] * ds];
            a[0] * s
        }
    };
    Ok((v, g))
}
