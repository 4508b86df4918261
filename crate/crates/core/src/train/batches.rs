use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CutsError, Result};
use crate::model::window_rows;
use crate::scalar::Scalar;

/// One mini-batch for a single target series.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub target_index: usize,
    pub times: Vec<usize>,
    /// Flattened lag windows, one row per sample.
    pub windows: Array2<T>,
    /// Column of `x[t, target_index]`.
    pub targets: Array2<T>,
    /// Column of observation flags for the targets.
    pub target_mask: Array2<T>,
}

/// Prediction times `tau_max..L` for one target, shuffled and chunked.
pub fn shuffled_chunks<R: Rng + ?Sized>(len: usize, tau_max: usize, batch_size: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if len <= tau_max {
        return Err(CutsError::Config(format!("series length {len} must exceed tau_max {tau_max}")));
    }
    if batch_size == 0 {
        return Err(CutsError::Config("batch size must be positive".into()));
    }
    let mut times: Vec<usize> = (tau_max..len).collect();
    times.shuffle(rng);
    Ok(times.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub(crate) fn assemble<T: Scalar>(x: &Array2<T>, mask: &Array2<bool>, tau_max: usize, j: usize, times: Vec<usize>) -> Batch<T> {
    let windows = window_rows(x, &times, tau_max);
    let targets = Array2::from_shape_fn((times.len(), 1), |(r, _)| x[[times[r], j]]);
    let target_mask = Array2::from_shape_fn((times.len(), 1), |(r, _)| if mask[[times[r], j]] { T::one() } else { T::zero() });
    Batch { target_index: j, times, windows, targets, target_mask }
}

/// Sliding-window samples `(x[t-tau_max..t], x[t, j], o[t, j], j)` for every
/// target and every `t` in `tau_max..L`, shuffled per target and grouped into
/// batches of `batch_size`.
pub fn build_batches<T: Scalar, R: Rng + ?Sized>(
    x_work: &Array2<T>,
    mask: &Array2<bool>,
    tau_max: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Batch<T>>> {
    if x_work.dim() != mask.dim() {
        return Err(CutsError::Shape(format!("series {:?} vs mask {:?}", x_work.dim(), mask.dim())));
    }
    let mut out = Vec::new();
    for j in 0..x_work.ncols() {
        for times in shuffled_chunks(x_work.nrows(), tau_max, batch_size, rng)? {
            out.push(assemble(x_work, mask, tau_max, j, times));
        }
    }
    Ok(out)
}
