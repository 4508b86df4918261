//! The alternating optimization loop.
//!
//! Each epoch runs, per target series and independently across targets:
//! the latent-data prediction stage (predictor weights, hard Bernoulli edge
//! masks), then the graph fitting stage (edge logits, relaxed Gumbel masks,
//! L1 penalty on edge probabilities). At the epoch barrier the unobserved
//! entries of the working series are blended toward fresh predictions while
//! the imputation phase is active.
//!
//! Every random draw comes from a stream keyed by `(seed, stage, epoch,
//! target)`, so results do not depend on how targets are scheduled.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use super::batches::{assemble, shuffled_chunks};
use super::schedule::{gumbel_tau_schedule, lr_schedule};
use super::RunConfig;
use crate::datagen::TimeSeriesDataset;
use crate::error::{CutsError, Result};
use crate::eval::{auroc, auroc_temporal, imputation_mse, RunReport};
use crate::model::{bernoulli_rows, gumbel_noise, record_gumbel_mask, CausalProbabilityGraph, PredictorEnsemble};
use crate::numgrad::{logistic, AdamState, Mlp, Tape};
use crate::rng;
use crate::scalar::Scalar;

const STAGE_PREDICT: u64 = 1;
const STAGE_GRAPH: u64 = 2;
const STAGE_IMPUTE: u64 = 3;
const PREDICT_CHUNK: usize = 2048;

/// Which part of the schedule an epoch belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    WarmUp,
    Imputation,
    FineTune,
}

/// Per-series affine normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    fn identity(n: usize) -> Self {
        Scaler { mean: vec![0.0; n], std: vec![1.0; n] }
    }

    /// Mean and standard deviation of the observed entries of each series.
    fn fit(x: &Array2<f64>, mask: &Array2<bool>) -> Self {
        let n = x.ncols();
        let mut mean = vec![0.0; n];
        let mut std = vec![1.0; n];
        for i in 0..n {
            let vals: Vec<f64> = x.column(i).iter().zip(mask.column(i)).filter(|(_, &o)| o).map(|(v, _)| *v).collect();
            if vals.is_empty() {
                continue;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            mean[i] = m;
            if var > 0.0 {
                std[i] = var.sqrt();
            }
        }
        Scaler { mean, std }
    }

    fn forward<T: Scalar>(&self, x: &Array2<f64>) -> Array2<T> {
        Array2::from_shape_fn(x.dim(), |(t, i)| T::of((x[[t, i]] - self.mean[i]) / self.std[i]))
    }

    fn inverse<T: Scalar>(&self, z: &Array2<T>) -> Array2<f64> {
        Array2::from_shape_fn(z.dim(), |(t, i)| z[[t, i]].as_f64() * self.std[i] + self.mean[i])
    }
}

/// Mutable learning state.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub ensemble: PredictorEnsemble<T>,
    pub cpg: CausalProbabilityGraph<T>,
    /// Working series in normalized units.
    pub x_work: Array2<T>,
    /// Index of the next epoch to run.
    pub epoch: usize,
    pub net_adam: Vec<AdamState<T>>,
    pub graph_adam: Vec<AdamState<T>>,
    pub loss_pred_trace: Vec<f64>,
    pub loss_graph_trace: Vec<f64>,
    pub mse_trace: Vec<f64>,
}

/// Final products of a run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub cpg: CausalProbabilityGraph<f64>,
    /// Working series in original units after the last epoch.
    pub imputed: Array2<f64>,
}

pub struct Trainer<T> {
    config: RunConfig,
    dataset: TimeSeriesDataset,
    scaler: Scaler,
    /// Initial fill in normalized units.
    x_init: Array2<T>,
    /// `L' / sum(o)` per series, over prediction times `t >= tau_max`.
    obs_weight: Vec<T>,
    state: TrainState<T>,
}

fn diverged(epoch: usize) -> impl Fn(CutsError) -> CutsError {
    move |e| match e {
        CutsError::NonFiniteGradient(d) => CutsError::Diverged { epoch, detail: format!("non-finite gradient in {d}") },
        other => other,
    }
}

impl<T: Scalar> Trainer<T> {
    pub fn new(dataset: &TimeSeriesDataset, config: RunConfig) -> Result<Self> {
        config.validate()?;
        dataset.validate()?;
        let (len, n) = dataset.x_latent.dim();
        let tau = config.input_step;
        if dataset.x_observed.iter().any(|v| !v.is_finite()) {
            return Err(CutsError::Config("observed series contain non-finite values".into()));
        }
        if len <= tau {
            return Err(CutsError::Config(format!("series length {len} must exceed input_step {tau}")));
        }
        let mut obs_weight = Vec::with_capacity(n);
        for i in 0..n {
            let seen = (tau..len).filter(|&t| dataset.mask[[t, i]]).count();
            if seen == 0 {
                return Err(CutsError::Config(format!(
                    "series {} has no observed entries after the first {tau} steps; nothing to fit",
                    i + 1
                )));
            }
            obs_weight.push(T::of((len - tau) as f64 / seen as f64));
        }
        let scaler = if config.standardize { Scaler::fit(&dataset.x_observed, &dataset.mask) } else { Scaler::identity(n) };
        let x_init: Array2<T> = scaler.forward(&dataset.x_observed);

        let ensemble = PredictorEnsemble::new(
            n,
            tau,
            config.hidden_features,
            config.network_layers,
            T::of(config.negative_slope),
            config.seed,
        )?;
        let cpg = CausalProbabilityGraph::new(tau, n, T::of(config.theta_init))?;
        let net_adam = ensemble.nets.iter().map(|m| AdamState::new(m.params(), config.adam(config.weight_decay))).collect();
        let graph_adam = (0..n).map(|j| AdamState::new(&[cpg.target_logits(j)], config.adam(0.0))).collect();

        let state = TrainState {
            ensemble,
            cpg,
            x_work: x_init.clone(),
            epoch: 0,
            net_adam,
            graph_adam,
            loss_pred_trace: Vec::new(),
            loss_graph_trace: Vec::new(),
            mse_trace: Vec::new(),
        };
        Ok(Trainer { config, dataset: dataset.clone(), scaler, x_init, obs_weight, state })
    }

    /// Replaces the learning state, e.g. from a checkpoint.
    pub fn with_state(mut self, state: TrainState<T>) -> Result<Self> {
        let (len, n) = self.dataset.x_latent.dim();
        if state.x_work.dim() != (len, n)
            || state.cpg.n() != n
            || state.cpg.tau_max() != self.config.input_step
            || state.ensemble.n() != n
            || state.net_adam.len() != n
            || state.graph_adam.len() != n
        {
            return Err(CutsError::Shape("training state does not match the dataset and configuration".into()));
        }
        self.state = state;
        Ok(self)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &TrainState<T> {
        &self.state
    }

    pub fn initial_fill(&self) -> &Array2<T> {
        &self.x_init
    }

    pub fn is_finished(&self) -> bool {
        self.state.epoch >= self.config.total_epochs()
    }

    pub fn phase(&self, epoch: usize) -> Phase {
        let c = &self.config;
        if epoch < c.n1 {
            Phase::WarmUp
        } else if epoch < c.n1 + c.n2 {
            Phase::Imputation
        } else {
            Phase::FineTune
        }
    }

    fn sample_weights(&self, j: usize, batch_mask: &Array2<T>, finetune: bool) -> Array2<T> {
        if finetune {
            Array2::ones(batch_mask.dim())
        } else {
            batch_mask * self.obs_weight[j]
        }
    }

    /// Latent-data prediction stage: one pass over all windows per target,
    /// updating predictor weights with the edge graph frozen. Returns the sum
    /// over targets of the mean batch loss.
    pub fn prediction_stage_epoch(&mut self) -> Result<f64> {
        let epoch = self.state.epoch;
        let finetune = self.phase(epoch) == Phase::FineTune;
        let lr = T::of(lr_schedule(epoch, self.config.total_epochs(), self.config.lr_data, self.config.lr_decay_to));
        let probs: Vec<Array2<T>> = (0..self.dataset.n_series()).map(|j| self.state.cpg.target_logits(j).mapv(logistic)).collect();
        let (tau, bs, seed) = (self.config.input_step, self.config.batch_size, self.config.seed);

        let mut nets = std::mem::take(&mut self.state.ensemble.nets);
        let mut adams = std::mem::take(&mut self.state.net_adam);
        let this = &*self;
        let x = &this.state.x_work;
        let losses: Result<Vec<f64>> = nets
            .par_iter_mut()
            .zip(adams.par_iter_mut())
            .enumerate()
            .map(|(j, (net, adam))| {
                let mut r = rng::stream(seed, &[STAGE_PREDICT, epoch as u64, j as u64]);
                let mut total = 0.0;
                let chunks = shuffled_chunks(x.nrows(), tau, bs, &mut r)?;
                let count = chunks.len();
                for times in chunks {
                    let batch = assemble(x, &this.dataset.mask, tau, j, times);
                    let masks = bernoulli_rows(&probs[j], batch.times.len(), &mut r);
                    let weights = this.sample_weights(j, &batch.target_mask, finetune);
                    let loss = fit_predictor_batch(net, adam, &(&batch.windows * &masks), &batch.targets, weights, lr)
                        .map_err(diverged(epoch))?;
                    if !loss.is_finite() {
                        return Err(CutsError::Diverged { epoch, detail: format!("prediction loss for series {} is {loss}", j + 1) });
                    }
                    total += loss;
                }
                Ok(total / count as f64)
            })
            .collect();
        self.state.ensemble.nets = nets;
        self.state.net_adam = adams;
        Ok(losses?.iter().sum())
    }

    /// Causal graph fitting stage: one pass per target updating that target's
    /// edge logits with the predictors frozen.
    pub fn graph_stage_epoch(&mut self) -> Result<f64> {
        let epoch = self.state.epoch;
        let finetune = self.phase(epoch) == Phase::FineTune;
        let lr = T::of(lr_schedule(epoch, self.config.total_epochs(), self.config.lr_graph, self.config.lr_decay_to));
        let temperature = gumbel_tau_schedule(epoch, &self.config);
        let lambda = T::of(self.config.lambda);
        let (tau, bs, seed) = (self.config.input_step, self.config.batch_size, self.config.seed);
        let n = self.dataset.n_series();

        let mut rows: Vec<Array2<T>> = (0..n).map(|j| self.state.cpg.target_logits(j)).collect();
        let mut adams = std::mem::take(&mut self.state.graph_adam);
        let this = &*self;
        let x = &this.state.x_work;
        let losses: Result<Vec<f64>> = rows
            .par_iter_mut()
            .zip(adams.par_iter_mut())
            .enumerate()
            .map(|(j, (row, adam))| {
                let net = &this.state.ensemble.nets[j];
                let mut r = rng::stream(seed, &[STAGE_GRAPH, epoch as u64, j as u64]);
                let mut total = 0.0;
                let chunks = shuffled_chunks(x.nrows(), tau, bs, &mut r)?;
                let count = chunks.len();
                for times in chunks {
                    let batch = assemble(x, &this.dataset.mask, tau, j, times);
                    let noise = gumbel_noise::<T, _>(batch.times.len(), row.ncols(), &mut r);
                    let weights = this.sample_weights(j, &batch.target_mask, finetune);
                    let loss = fit_graph_batch(net, row, adam, &batch.windows, noise, &batch.targets, weights, temperature, lambda, lr)
                        .map_err(diverged(epoch))?;
                    if !loss.is_finite() {
                        return Err(CutsError::Diverged { epoch, detail: format!("graph loss for series {} is {loss}", j + 1) });
                    }
                    total += loss;
                }
                Ok(total / count as f64)
            })
            .collect();
        self.state.graph_adam = adams;
        let losses = losses?;
        for (j, row) in rows.iter().enumerate() {
            self.state.cpg.set_target_logits(j, row)?;
        }
        Ok(losses.iter().sum())
    }

    /// One-step predictions for every entry with a full lag window, using a
    /// hard edge mask drawn once per entry (or all edges when the ablation
    /// removes the graph from imputation). Rows before `tau_max` repeat the
    /// working series.
    pub fn predict_series(&self) -> Result<Array2<T>> {
        let epoch = self.state.epoch;
        let x = &self.state.x_work;
        let (len, n) = x.dim();
        let tau = self.config.input_step;
        let use_graph = !self.config.ablation.no_cpg_for_imputation;
        let times: Vec<usize> = (tau..len).collect();
        let columns: Result<Vec<Vec<T>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let net = &self.state.ensemble.nets[j];
                let probs = self.state.cpg.target_logits(j).mapv(logistic);
                let mut r = rng::stream(self.config.seed, &[STAGE_IMPUTE, epoch as u64, j as u64]);
                let mut out = Vec::with_capacity(times.len());
                for chunk in times.chunks(PREDICT_CHUNK) {
                    let mut windows = crate::model::window_rows(x, chunk, tau);
                    if use_graph {
                        windows = windows * bernoulli_rows(&probs, chunk.len(), &mut r);
                    }
                    out.extend(net.forward(&windows)?.iter().copied());
                }
                Ok(out)
            })
            .collect();
        let mut x_hat = x.clone();
        for (j, col) in columns?.into_iter().enumerate() {
            for (k, v) in col.into_iter().enumerate() {
                x_hat[[tau + k, j]] = v;
            }
        }
        Ok(x_hat)
    }

    /// Blends unobserved entries toward `x_hat` at rate alpha during the
    /// imputation phase; observed entries always keep the initial value and
    /// nothing moves during warm-up or fine-tuning.
    pub fn impute_update(&mut self, x_hat: &Array2<T>) -> Result<()> {
        if x_hat.dim() != self.state.x_work.dim() {
            return Err(CutsError::Shape(format!("predictions {:?} vs series {:?}", x_hat.dim(), self.state.x_work.dim())));
        }
        let phase = self.phase(self.state.epoch);
        let alpha = T::of(self.config.effective_alpha());
        let one = T::one();
        let mask = &self.dataset.mask;
        for (((w, &init), &pred), &o) in self.state.x_work.iter_mut().zip(&self.x_init).zip(x_hat).zip(mask) {
            match (o, phase) {
                (true, _) | (false, Phase::WarmUp) => *w = init,
                (false, Phase::Imputation) => *w = (one - alpha) * *w + alpha * pred,
                (false, Phase::FineTune) => {}
            }
        }
        Ok(())
    }

    /// Fine-tuning epoch: both stages with every entry supervised.
    pub fn finetune_epoch(&mut self) -> Result<(f64, f64)> {
        if self.phase(self.state.epoch) != Phase::FineTune {
            return Err(CutsError::State(format!("epoch {} is before the fine-tuning phase", self.state.epoch)));
        }
        let lp = self.prediction_stage_epoch()?;
        let lg = self.graph_stage_epoch()?;
        Ok((lp, lg))
    }

    /// Runs the next epoch of the schedule.
    pub fn step_epoch(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(CutsError::State("schedule already complete".into()));
        }
        let epoch = self.state.epoch;
        let (lp, lg) = match self.phase(epoch) {
            Phase::FineTune => self.finetune_epoch()?,
            Phase::WarmUp => (self.prediction_stage_epoch()?, self.graph_stage_epoch()?),
            Phase::Imputation => {
                let lp = self.prediction_stage_epoch()?;
                let lg = self.graph_stage_epoch()?;
                if self.config.effective_alpha() > 0.0 {
                    let x_hat = self.predict_series()?;
                    self.impute_update(&x_hat)?;
                }
                (lp, lg)
            }
        };
        if self.state.x_work.iter().any(|v| !v.is_finite()) {
            return Err(CutsError::Diverged { epoch, detail: "imputed series became non-finite".into() });
        }
        self.state.loss_pred_trace.push(lp);
        self.state.loss_graph_trace.push(lg);
        let mse = self.current_imputation_mse()?;
        self.state.mse_trace.push(mse);
        log::debug!("epoch {epoch}: pred {lp:.6} graph {lg:.6} mse {mse:.6}");
        self.state.epoch += 1;
        Ok(())
    }

    /// MSE of the working series against the latent series on missing entries,
    /// in original units.
    pub fn current_imputation_mse(&self) -> Result<f64> {
        imputation_mse(&self.imputed(), &self.dataset.x_latent, &self.dataset.mask)
    }

    pub fn imputed(&self) -> Array2<f64> {
        let mut out = self.scaler.inverse(&self.state.x_work);
        // observed entries reproduce the input exactly
        for ((v, &orig), &o) in out.iter_mut().zip(&self.dataset.x_observed).zip(&self.dataset.mask) {
            if o {
                *v = orig;
            }
        }
        out
    }

    /// Runs the remaining schedule, calling `after_epoch` at every epoch
    /// barrier.
    pub fn run_with<F>(mut self, mut after_epoch: F) -> Result<RunOutput>
    where
        F: FnMut(&Trainer<T>) -> Result<()>,
    {
        let start = Instant::now();
        while !self.is_finished() {
            self.step_epoch()?;
            after_epoch(&self)?;
        }
        self.finish(start.elapsed().as_secs_f64())
    }

    pub fn run(self) -> Result<RunOutput> {
        self.run_with(|_| Ok(()))
    }

    fn finish(self, wall_clock: f64) -> Result<RunOutput> {
        let cpg = CausalProbabilityGraph::from_logits(self.state.cpg.theta().mapv(|v| v.as_f64()))?;
        let probs = cpg.probabilities();
        let graph = cpg.aggregate();
        let ds = &self.dataset;
        let (mut summary, mut offdiag, mut temporal) = (None, None, None);
        if let Some(truth) = &ds.truth_summary {
            summary = auroc(&graph, truth, true).ok();
            offdiag = auroc(&graph, truth, false).ok();
        }
        if let Some(truth) = &ds.truth_lagged {
            if truth.dim() == probs.dim() {
                temporal = auroc_temporal(&probs, truth).ok();
            }
        }
        let report = RunReport {
            seed: self.config.seed,
            config: self.config.clone(),
            dataset: ds.meta.clone(),
            auroc_summary: summary,
            auroc_summary_offdiag: offdiag,
            auroc_temporal: temporal,
            mse_trace: self.state.mse_trace.clone(),
            loss_pred_trace: self.state.loss_pred_trace.clone(),
            loss_graph_trace: self.state.loss_graph_trace.clone(),
            final_graph: graph.rows().into_iter().map(|r| r.to_vec()).collect(),
            wall_clock_secs: wall_clock,
        };
        let imputed = self.imputed();
        Ok(RunOutput { report, cpg, imputed })
    }
}

/// One optimizer step of a predictor on pre-masked inputs; returns the
/// batch sum of weighted squared errors before the step.
pub fn fit_predictor_batch<T: Scalar>(
    net: &mut Mlp<T>,
    adam: &mut AdamState<T>,
    inputs: &Array2<T>,
    targets: &Array2<T>,
    weights: Array2<T>,
    lr: T,
) -> Result<f64> {
    let mut tape = Tape::new();
    let x = tape.constant(inputs.clone());
    let (pred, leaves) = net.record(&mut tape, x, true);
    let y = tape.constant(targets.clone());
    let se = tape.squared_error(pred, y);
    let w = tape.constant(weights);
    let weighted = tape.mul(se, w);
    tape.sum(weighted);
    let loss = tape.forward(&[])?;
    tape.backward()?;
    let grads = leaves.into_iter().map(|v| tape.take_grad(v)).collect::<Result<Vec<_>>>()?;
    adam.step(net.params_mut(), &grads, lr)?;
    Ok(loss.as_f64())
}

/// One optimizer step of a target's edge logits with relaxed masks; returns
/// the weighted prediction loss plus `lambda * sum(logistic(logits))`.
#[allow(clippy::too_many_arguments)]
pub fn fit_graph_batch<T: Scalar>(
    net: &Mlp<T>,
    logits: &mut Array2<T>,
    adam: &mut AdamState<T>,
    windows: &Array2<T>,
    noise: Array2<T>,
    targets: &Array2<T>,
    weights: Array2<T>,
    temperature: f64,
    lambda: T,
    lr: T,
) -> Result<f64> {
    let mut tape = Tape::new();
    let theta = tape.parameter(logits.clone());
    let nz = tape.constant(noise);
    let s = record_gumbel_mask(&mut tape, theta, nz, temperature);
    let win = tape.constant(windows.clone());
    let masked = tape.mul(win, s);
    let (pred, _) = net.record(&mut tape, masked, false);
    let y = tape.constant(targets.clone());
    let se = tape.squared_error(pred, y);
    let w = tape.constant(weights);
    let weighted = tape.mul(se, w);
    let data = tape.sum(weighted);
    let probs = tape.logistic(theta);
    let l1 = tape.sum(probs);
    let penalty = tape.scale(l1, lambda);
    tape.add(data, penalty);
    let loss = tape.forward(&[])?;
    tape.backward()?;
    let grad = tape.take_grad(theta)?;
    adam.step(std::slice::from_mut(logits), &[grad], lr)?;
    Ok(loss.as_f64())
}

/// Masked prediction loss over whole series:
/// `sum_i <(x_hat_i - x_i)^2, o_i> / ((1/L) <o_i, o_i>)`.
pub fn prediction_loss(pred: &Array2<f64>, target: &Array2<f64>, mask: &Array2<bool>) -> Result<f64> {
    if pred.dim() != target.dim() || mask.dim() != target.dim() {
        return Err(CutsError::Shape(format!("pred {:?}, target {:?}, mask {:?}", pred.dim(), target.dim(), mask.dim())));
    }
    let len = target.nrows() as f64;
    let mut total = 0.0;
    for i in 0..target.ncols() {
        let observed = mask.column(i).iter().filter(|&&o| o).count();
        if observed == 0 {
            continue;
        }
        let num: f64 = (0..target.nrows())
            .filter(|&t| mask[[t, i]])
            .map(|t| (pred[[t, i]] - target[[t, i]]).powi(2))
            .sum();
        total += num / (observed as f64 / len);
    }
    Ok(total)
}
