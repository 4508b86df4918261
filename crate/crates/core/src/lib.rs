//! Joint imputation and causal discovery for irregularly sampled
//! multivariate time series.
//!
//! A per-series neural predictor learns to forecast each series from the
//! lagged values of all series, gated by a learned matrix of edge
//! probabilities. Training alternates between fitting predictors, fitting
//! edge probabilities under a sparsity penalty, and refining the values of
//! unobserved entries from the predictors' own forecasts.

pub mod datagen;
pub mod error;
pub mod eval;
mod fsutil;
pub mod model;
pub mod numgrad;
pub mod rng;
pub mod scalar;
pub mod train;

pub use error::{CutsError, Result};
pub use scalar::Scalar;
pub use train::{run_cuts, RunConfig, RunOutput};

pub type Tape64 = numgrad::Tape<f64>;
pub type Tape32 = numgrad::Tape<f32>;
pub type Mlp64 = numgrad::Mlp<f64>;
pub type Mlp32 = numgrad::Mlp<f32>;
pub type Graph64 = model::CausalProbabilityGraph<f64>;
pub type Graph32 = model::CausalProbabilityGraph<f32>;
pub type Ensemble64 = model::PredictorEnsemble<f64>;
pub type Ensemble32 = model::PredictorEnsemble<f32>;
pub type Trainer64 = train::Trainer<f64>;
pub type Trainer32 = train::Trainer<f32>;
