use ndarray::{s, Array2};

use super::EdgeSampleMask;
use crate::error::{CutsError, Result};
use crate::numgrad::Mlp;
use crate::rng;
use crate::scalar::Scalar;

/// One predictor per target series. Net `j` reads the edge-masked lag window
/// of all series (flattened in window order) and predicts `x[t, j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorEnsemble<T> {
    pub nets: Vec<Mlp<T>>,
    tau_max: usize,
    n: usize,
}

impl<T: Scalar> PredictorEnsemble<T> {
    pub fn new(n: usize, tau_max: usize, hidden: usize, layers: usize, negative_slope: T, seed: u64) -> Result<Self> {
        let nets = (0..n)
            .map(|j| {
                let mut r = rng::stream(seed, &[0x6e6574, j as u64]);
                Mlp::new(n * tau_max, hidden, layers, negative_slope, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictorEnsemble { nets, tau_max, n })
    }

    pub fn from_nets(nets: Vec<Mlp<T>>, tau_max: usize) -> Result<Self> {
        let n = nets.len();
        if let Some(bad) = nets.iter().position(|m| m.input_width() != n * tau_max) {
            return Err(CutsError::Shape(format!("net {bad} does not take a {tau_max}x{n} window")));
        }
        Ok(PredictorEnsemble { nets, tau_max, n })
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Lag window preceding time `t`: `w[[tau - 1, i]] = x[t - tau, i]`.
pub fn lag_window<T: Scalar>(x: &Array2<T>, t: usize, tau_max: usize) -> Array2<T> {
    let mut w = x.slice(s![t - tau_max..t, ..]).to_owned();
    w.invert_axis(ndarray::Axis(0));
    w
}

/// Flattened windows for several time indices, one per row.
pub fn window_rows<T: Scalar>(x: &Array2<T>, times: &[usize], tau_max: usize) -> Array2<T> {
    let n = x.ncols();
    let mut out = Array2::zeros((times.len(), tau_max * n));
    for (r, &t) in times.iter().enumerate() {
        let mut row = out.row_mut(r);
        for lag in 1..=tau_max {
            row.slice_mut(s![(lag - 1) * n..lag * n]).assign(&x.row(t - lag));
        }
    }
    out
}

/// `f_j(window ⊙ s)` for a single sample.
pub fn dsgnn_predict<T: Scalar>(net: &Mlp<T>, window: &Array2<T>, mask: &EdgeSampleMask<T>) -> Result<T> {
    if window.dim() != mask.values.dim() {
        return Err(CutsError::Shape(format!("window {:?} vs mask {:?}", window.dim(), mask.values.dim())));
    }
    let masked = window * &mask.values;
    let flat = masked.into_shape_with_order((1, mask.values.len())).map_err(|e| CutsError::Shape(e.to_string()))?;
    Ok(net.forward(&flat)?[[0, 0]])
}

/// Sum over windows of `(f(X ⊙ S[k=1]) - f(X ⊙ S[k=0]))^2` for window slot
/// `k = (tau - 1) * N + i`, all other slots kept. Large values mean the
/// predictor relies on that lagged input.
pub fn edge_effect_statistic<T: Scalar>(net: &Mlp<T>, windows: &Array2<T>, slot: usize) -> Result<T> {
    if slot >= windows.ncols() {
        return Err(CutsError::Config(format!("slot {slot} outside a {}-wide window", windows.ncols())));
    }
    let with = net.forward(windows)?;
    let mut ablated = windows.clone();
    ablated.column_mut(slot).fill(T::zero());
    let without = net.forward(&ablated)?;
    Ok((&with - &without).mapv(|d| d * d).sum())
}
