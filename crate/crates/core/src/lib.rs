//! Data-driven configuration and initialization for stacked Bag-of-Functions
//! (BoF) time-series models.
//!
//! The pipeline extracts spectral priors (dominant modes, amplitudes, phases)
//! and trend priors (slope/bias statistics, minimal window length) from a
//! dataset, derives an architecture configuration from them, and trains small
//! stacked BoF models under four initialization strategies:
//!
//! - `bof` — baseline with Kaiming-uniform weights,
//! - `h-bof` — heuristic final-layer bias initialization from a fixed role table,
//! - `i-bof` — data-driven depth and seasonal/trend bias initialization,
//! - `it-bof` — additionally sizes the trend encoder input from the
//!   finite-sample slope-estimation bound.
//!
//! Modules follow the pipeline order: [`dataset`] → [`spectral`] → [`trend`]
//! → [`priors`] → [`model`] → [`train`], with [`cli`] binding everything into
//! the `bof` command-line tool.

pub mod basis;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod model;
pub mod priors;
pub mod rng;
pub mod spectral;
pub mod train;
pub mod trend;

pub use dataset::{TimeGrid, TimeSeries, TimeSeriesDataset};
pub use error::{Error, Result};
pub use priors::PriorConfig;
