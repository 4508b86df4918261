//! Edge-mask sampling: hard Bernoulli draws and the Gumbel-Softmax
//! relaxation. Masks for one target are laid out in window order,
//! `k = (tau - 1) * N + i`.

use ndarray::Array2;
use rand::Rng;

use super::CausalProbabilityGraph;
use crate::error::{CutsError, Result};
use crate::numgrad::{logistic, Tape, Var};
use crate::scalar::Scalar;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before the relaxation.
pub const GUMBEL_EPS: f64 = 1e-7;

/// Edge mask for one (sample, target) pair, `values[[tau - 1, i]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSampleMask<T> {
    pub values: Array2<T>,
}

impl<T: Scalar> EdgeSampleMask<T> {
    pub fn ones(tau_max: usize, n: usize) -> Self {
        EdgeSampleMask { values: Array2::ones((tau_max, n)) }
    }

    pub fn zeros(tau_max: usize, n: usize) -> Self {
        EdgeSampleMask { values: Array2::zeros((tau_max, n)) }
    }

    /// One row in window order.
    pub fn flatten(&self) -> Array2<T> {
        let flat: Vec<T> = self.values.iter().copied().collect();
        Array2::from_shape_vec((1, flat.len()), flat).expect("row shape")
    }
}

fn check_target<T: Scalar>(cpg: &CausalProbabilityGraph<T>, j: usize) -> Result<()> {
    if j >= cpg.n() {
        return Err(CutsError::Config(format!("target {j} out of range for {} series", cpg.n())));
    }
    Ok(())
}

/// `s ~ Bernoulli(m)` for every lagged parent of target `j`.
pub fn sample_bernoulli_mask<T: Scalar, R: Rng + ?Sized>(
    cpg: &CausalProbabilityGraph<T>,
    j: usize,
    rng: &mut R,
) -> Result<EdgeSampleMask<T>> {
    check_target(cpg, j)?;
    let probs = cpg.target_logits(j).mapv(logistic);
    let row = bernoulli_rows(&probs, 1, rng);
    Ok(EdgeSampleMask { values: row.into_shape_with_order((cpg.tau_max(), cpg.n())).expect("mask shape") })
}

/// `rows` independent hard masks from a row of keep-probabilities.
pub fn bernoulli_rows<T: Scalar, R: Rng + ?Sized>(probs: &Array2<T>, rows: usize, rng: &mut R) -> Array2<T> {
    let k = probs.ncols();
    Array2::from_shape_fn((rows, k), |(_, c)| {
        if T::of(rng.random::<f64>()) < probs[[0, c]] {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Standard Gumbel draw `-log(-log u)`.
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // open interval keeps both logs finite
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Two-branch relaxation of a Bernoulli(m) draw given Gumbel noise for the
/// keep branch (`g_keep`) and the drop branch (`g_drop`):
///
/// `exp((log m + g_keep)/t) / (exp((log m + g_keep)/t) + exp((log(1-m) + g_drop)/t))`
///
/// evaluated as a logistic of the branch difference so it stays finite for
/// small temperatures.
pub fn gumbel_softmax_value(m: f64, g_keep: f64, g_drop: f64, temperature: f64) -> f64 {
    let m = m.clamp(GUMBEL_EPS, 1.0 - GUMBEL_EPS);
    let keep = m.ln() + g_keep;
    let drop = (1.0 - m).ln() + g_drop;
    logistic((keep - drop) / temperature)
}

/// Relaxed mask for target `j`.
pub fn gumbel_softmax_mask<T: Scalar, R: Rng + ?Sized>(
    cpg: &CausalProbabilityGraph<T>,
    j: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<EdgeSampleMask<T>> {
    check_target(cpg, j)?;
    if !(temperature > 0.0) {
        return Err(CutsError::Config(format!("temperature must be positive, got {temperature}")));
    }
    let probs = cpg.target_logits(j).mapv(logistic);
    let values = probs.mapv(|m| {
        let (g1, g2) = (gumbel(rng), gumbel(rng));
        T::of(gumbel_softmax_value(m.as_f64(), g1, g2, temperature))
    });
    Ok(EdgeSampleMask { values: values.into_shape_with_order((cpg.tau_max(), cpg.n())).expect("mask shape") })
}

/// Noise differences `g_keep - g_drop` for a batch of relaxed masks.
pub fn gumbel_noise<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let (g1, g2) = (gumbel(rng), gumbel(rng));
        T::of(g1 - g2)
    })
}

/// Records the relaxed mask on a tape, differentiable in the logit row.
///
/// Since `log m - log(1 - m) = theta`, clamping `m` is the same as clamping
/// `theta` to `±logit(1 - EPS)`; the relaxation is then
/// `logistic((theta + g_keep - g_drop) / t)`.
pub fn record_gumbel_mask<T: Scalar>(tape: &mut Tape<T>, logits: Var, noise: Var, temperature: f64) -> Var {
    let bound = T::of(((1.0 - GUMBEL_EPS) / GUMBEL_EPS).ln());
    let clamped = tape.clamp(logits, -bound, bound);
    let shifted = tape.add(noise, clamped);
    let scaled = tape.scale(shifted, T::of(1.0 / temperature));
    tape.logistic(scaled)
}
