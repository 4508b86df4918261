//! Causal probability graph, per-series predictors and edge sampling.

mod cpg;
mod dsgnn;
mod sampling;

pub use cpg::{aggregate_graph, read_matrix_csv, write_graph_csv, CausalProbabilityGraph};
pub use dsgnn::{dsgnn_predict, edge_effect_statistic, lag_window, window_rows, PredictorEnsemble};
pub use sampling::{
    bernoulli_rows, gumbel, gumbel_noise, gumbel_softmax_mask, gumbel_softmax_value, record_gumbel_mask,
    sample_bernoulli_mask, EdgeSampleMask, GUMBEL_EPS,
};
