use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{CutsError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled (AdamW-style) decay coefficient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

impl AdamConfig {
    pub fn with_weight_decay(weight_decay: f64) -> Self {
        AdamConfig { weight_decay, ..Self::default() }
    }
}

/// Moment buffers for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    first: Vec<Array2<T>>,
    second: Vec<Array2<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Array2<T>], config: AdamConfig) -> Self {
        AdamState {
            config,
            first: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
            second: params.iter().map(|p| Array2::zeros(p.dim())).collect(),
            step: 0,
        }
    }

    /// Restores a state from saved moment buffers.
    pub fn from_parts(config: AdamConfig, first: Vec<Array2<T>>, second: Vec<Array2<T>>, step: u64) -> Result<Self> {
        if first.len() != second.len() || first.iter().zip(&second).any(|(a, b)| a.dim() != b.dim()) {
            return Err(CutsError::Shape("adam moment buffers are not congruent".into()));
        }
        Ok(AdamState { config, first, second, step })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Array2<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Array2<T>] {
        &self.second
    }

    /// One Adam update in place. Gradients are checked for finiteness before
    /// anything is modified.
    pub fn step(&mut self, params: &mut [Array2<T>], grads: &[Array2<T>], lr: T) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(CutsError::Shape(format!(
                "adam holds {} buffers, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.dim() != self.first[i].dim() || g.dim() != p.dim() {
                return Err(CutsError::Shape(format!(
                    "adam buffer {i}: state {:?}, param {:?}, grad {:?}",
                    self.first[i].dim(),
                    p.dim(),
                    g.dim()
                )));
            }
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(CutsError::NonFiniteGradient(format!("parameter {i}, element {pos}")));
            }
        }
        if !(lr > T::zero()) {
            return Err(CutsError::Config(format!("learning rate must be positive, got {lr}")));
        }

        self.step += 1;
        let c = self.config;
        let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
        let one = T::one();
        let t = self.step as i32;
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let decay = one - lr * T::of(c.weight_decay);

        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p = *p * decay - lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}
