//! Resumable training snapshots. Values are stored as `f64`, which is exact
//! for both supported scalar types.

use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::trainer::TrainState;
use super::RunConfig;
use crate::error::{CutsError, Result};
use crate::fsutil::{read_json, write_json};
use crate::model::{CausalProbabilityGraph, PredictorEnsemble};
use crate::numgrad::{AdamConfig, AdamState, Mlp};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    fn from_array<T: Scalar>(a: &Array2<T>) -> Self {
        Matrix { rows: a.nrows(), cols: a.ncols(), data: a.iter().map(|v| v.as_f64()).collect() }
    }

    fn to_array<T: Scalar>(&self) -> Result<Array2<T>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.iter().map(|&v| T::of(v)).collect())
            .map_err(|e| CutsError::Shape(format!("checkpoint matrix: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSnapshot {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Matrix>,
    pub second: Vec<Matrix>,
}

impl OptimizerSnapshot {
    fn capture<T: Scalar>(s: &AdamState<T>) -> Self {
        OptimizerSnapshot {
            config: s.config,
            step: s.steps(),
            first: s.first_moments().iter().map(Matrix::from_array).collect(),
            second: s.second_moments().iter().map(Matrix::from_array).collect(),
        }
    }

    fn restore<T: Scalar>(&self) -> Result<AdamState<T>> {
        let first = self.first.iter().map(Matrix::to_array).collect::<Result<Vec<_>>>()?;
        let second = self.second.iter().map(Matrix::to_array).collect::<Result<Vec<_>>>()?;
        AdamState::from_parts(self.config, first, second, self.step)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Configuration the state belongs to; resuming under another one is refused.
    pub config: RunConfig,
    /// Next epoch to run.
    pub epoch: usize,
    pub tau_max: usize,
    pub n: usize,
    pub theta: Vec<f64>,
    pub negative_slope: f64,
    /// Per target: `[w0, b0, w1, b1, ...]`.
    pub nets: Vec<Vec<Matrix>>,
    pub net_optimizers: Vec<OptimizerSnapshot>,
    pub graph_optimizers: Vec<OptimizerSnapshot>,
    pub x_work: Matrix,
    pub loss_pred_trace: Vec<f64>,
    pub loss_graph_trace: Vec<f64>,
    pub mse_trace: Vec<f64>,
}

impl Checkpoint {
    pub fn capture<T: Scalar>(config: &RunConfig, state: &TrainState<T>) -> Self {
        let slope = state.ensemble.nets.first().map_or(config.negative_slope, |m| m.negative_slope().as_f64());
        Checkpoint {
            config: config.clone(),
            epoch: state.epoch,
            tau_max: state.cpg.tau_max(),
            n: state.cpg.n(),
            theta: state.cpg.theta().iter().map(|v| v.as_f64()).collect(),
            negative_slope: slope,
            nets: state.ensemble.nets.iter().map(|m| m.params().iter().map(Matrix::from_array).collect()).collect(),
            net_optimizers: state.net_adam.iter().map(OptimizerSnapshot::capture).collect(),
            graph_optimizers: state.graph_adam.iter().map(OptimizerSnapshot::capture).collect(),
            x_work: Matrix::from_array(&state.x_work),
            loss_pred_trace: state.loss_pred_trace.clone(),
            loss_graph_trace: state.loss_graph_trace.clone(),
            mse_trace: state.mse_trace.clone(),
        }
    }

    pub fn restore<T: Scalar>(&self) -> Result<TrainState<T>> {
        let theta = Array3::from_shape_vec((self.tau_max, self.n, self.n), self.theta.iter().map(|&v| T::of(v)).collect())
            .map_err(|e| CutsError::Shape(format!("checkpoint logits: {e}")))?;
        let mut nets = Vec::with_capacity(self.nets.len());
        for params in &self.nets {
            if params.len() % 2 != 0 {
                return Err(CutsError::Shape("checkpoint network has an unpaired weight".into()));
            }
            let arrays = params.iter().map(Matrix::to_array).collect::<Result<Vec<Array2<T>>>>()?;
            let layers = arrays.chunks(2).map(|wb| (wb[0].clone(), wb[1].clone())).collect();
            nets.push(Mlp::from_layers(layers, T::of(self.negative_slope))?);
        }
        Ok(TrainState {
            ensemble: PredictorEnsemble::from_nets(nets, self.tau_max)?,
            cpg: CausalProbabilityGraph::from_logits(theta)?,
            x_work: self.x_work.to_array()?,
            epoch: self.epoch,
            net_adam: self.net_optimizers.iter().map(OptimizerSnapshot::restore).collect::<Result<_>>()?,
            graph_adam: self.graph_optimizers.iter().map(OptimizerSnapshot::restore).collect::<Result<_>>()?,
            loss_pred_trace: self.loss_pred_trace.clone(),
            loss_graph_trace: self.loss_graph_trace.clone(),
            mse_trace: self.mse_trace.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // write-then-rename so an interrupted save never leaves a torn file
        let tmp = path.with_extension("json.tmp");
        write_json(&tmp, self)?;
        std::fs::rename(&tmp, path).map_err(|e| CutsError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}
