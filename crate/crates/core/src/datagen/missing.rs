use ndarray::Array2;
use rand::Rng;

use super::{MissingMeta, TimeSeriesDataset};
use crate::error::{CutsError, Result};
use crate::rng;

/// Each entry independently unobserved with probability `p`.
pub fn apply_random_missing(mut ds: TimeSeriesDataset, p: f64, seed: u64) -> Result<TimeSeriesDataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CutsError::Config(format!("missing probability must lie in [0, 1], got {p}")));
    }
    let (len, n) = ds.x_latent.dim();
    let mut mask = Array2::from_elem((len, n), true);
    for i in 0..n {
        let mut r = rng::stream(seed, &[0x6d61_736b, i as u64]);
        for t in 0..len {
            mask[[t, i]] = r.random::<f64>() >= p;
        }
    }
    ds.set_mask(mask)?;
    ds.meta.missing = Some(MissingMeta::Random { p, seed });
    Ok(ds)
}

/// Series `i` observed only at multiples of its own period `T_i`, drawn
/// uniformly from `1..=t_max`.
pub fn apply_periodic_missing(mut ds: TimeSeriesDataset, t_max: usize, seed: u64) -> Result<TimeSeriesDataset> {
    if t_max == 0 {
        return Err(CutsError::Config("t_max must be at least 1".into()));
    }
    let n = ds.n_series();
    let periods: Vec<usize> = (0..n)
        .map(|i| rng::stream(seed, &[0x7065_7269, i as u64]).random_range(1..=t_max))
        .collect();
    let mask = periodic_mask(ds.len(), &periods);
    ds.set_mask(mask)?;
    ds.meta.missing = Some(MissingMeta::Periodic { t_max, seed, periods });
    Ok(ds)
}

/// `O[t, i] = 1` iff `t mod periods[i] == 0`.
pub fn periodic_mask(len: usize, periods: &[usize]) -> Array2<bool> {
    Array2::from_shape_fn((len, periods.len()), |(t, i)| t % periods[i].max(1) == 0)
}

/// Zero-order hold per series: a missing entry takes the latest observed
/// value, leading gaps take the first observation, and a series with no
/// observation is filled with zeros.
pub fn zoh_fill(x: &Array2<f64>, mask: &Array2<bool>) -> Result<Array2<f64>> {
    if x.dim() != mask.dim() {
        return Err(CutsError::Shape(format!("series {:?} vs mask {:?}", x.dim(), mask.dim())));
    }
    let mut out = x.clone();
    for (mut col, o) in out.columns_mut().into_iter().zip(mask.columns()) {
        let first = col.iter().zip(o.iter()).find(|(_, &o)| o).map(|(v, _)| *v).unwrap_or(0.0);
        let mut held = first;
        for (v, &o) in col.iter_mut().zip(o.iter()) {
            if o {
                held = *v;
            } else {
                *v = held;
            }
        }
    }
    Ok(out)
}
