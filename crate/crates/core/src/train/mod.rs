//! Alternating optimization of predictors, edge logits and imputed values.

mod batches;
mod checkpoint;
mod config;
mod schedule;
mod trainer;

pub use batches::{build_batches, shuffled_chunks, Batch};
pub use checkpoint::{Checkpoint, Matrix, OptimizerSnapshot};
pub use config::{Ablation, Ablations, RunConfig};
pub use schedule::{gumbel_tau_schedule, lr_schedule};
pub use trainer::{fit_graph_batch, fit_predictor_batch, prediction_loss, Phase, RunOutput, Scaler, TrainState, Trainer};

use crate::datagen::TimeSeriesDataset;
use crate::error::Result;
use crate::scalar::Scalar;

/// Runs the full schedule on `dataset`.
pub fn run_cuts<T: Scalar>(dataset: &TimeSeriesDataset, config: RunConfig) -> Result<RunOutput> {
    Trainer::<T>::new(dataset, config)?.run()
}
