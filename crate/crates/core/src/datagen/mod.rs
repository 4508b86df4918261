//! Synthetic benchmark systems, observation masks and the on-disk dataset
//! format.

mod io;
mod lorenz;
mod missing;
mod recipe;
mod var;

use std::collections::BTreeMap;

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{CutsError, Result};

pub use io::{load_dataset, load_truth, read_series_csv, save_dataset, write_series_csv};
pub use lorenz::{gen_lorenz96, lorenz96_derivative, rk4_step, Lorenz96System};
pub use missing::{apply_periodic_missing, apply_random_missing, periodic_mask, zoh_fill};
pub use recipe::{DatasetRecipe, GeneratorConfig, LorenzParams, MissingConfig, VarParams};
pub use var::{companion_spectral_radius, gen_var, gen_var_with, spectral_radius, VarStructure, VarSystem};

/// How the observation mask was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum MissingMeta {
    Random { p: f64, seed: u64 },
    Periodic { t_max: usize, seed: u64, periods: Vec<usize> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing: Option<MissingMeta>,
}

impl DatasetMeta {
    pub fn tau_max(&self) -> Option<usize> {
        self.params.get("tau_max").and_then(|v| v.as_u64()).map(|v| v as usize)
    }
}

/// A multivariate series with its observation mask and, for synthetic data,
/// the ground-truth causal structure.
///
/// `truth_lagged[[tau - 1, i, j]]` is set when series `i` at lag `tau` drives
/// series `j`; `truth_summary[[i, j]]` is its maximum over lags.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    pub x_latent: Array2<f64>,
    pub x_observed: Array2<f64>,
    pub mask: Array2<bool>,
    pub truth_lagged: Option<Array3<bool>>,
    pub truth_summary: Option<Array2<bool>>,
    pub meta: DatasetMeta,
}

impl TimeSeriesDataset {
    /// Fully observed dataset over `x`.
    pub fn fully_observed(x: Array2<f64>, meta: DatasetMeta) -> Self {
        let mask = Array2::from_elem(x.dim(), true);
        TimeSeriesDataset {
            x_observed: x.clone(),
            x_latent: x,
            mask,
            truth_lagged: None,
            truth_summary: None,
            meta,
        }
    }

    pub fn with_lagged_truth(mut self, lagged: Array3<bool>) -> Self {
        self.truth_summary = Some(summarize_truth(&lagged));
        self.truth_lagged = Some(lagged);
        self
    }

    pub fn with_summary_truth(mut self, summary: Array2<bool>) -> Self {
        self.truth_summary = Some(summary);
        self
    }

    pub fn len(&self) -> usize {
        self.x_latent.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x_latent.nrows() == 0
    }

    pub fn n_series(&self) -> usize {
        self.x_latent.ncols()
    }

    /// Fraction of observed entries.
    pub fn observed_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&o| o).count() as f64 / self.mask.len().max(1) as f64
    }

    /// Replaces the mask and recomputes the hold-filled working copy.
    pub fn set_mask(&mut self, mask: Array2<bool>) -> Result<()> {
        if mask.dim() != self.x_latent.dim() {
            return Err(CutsError::Shape(format!(
                "mask {:?} does not match series {:?}",
                mask.dim(),
                self.x_latent.dim()
            )));
        }
        self.x_observed = zoh_fill(&self.x_latent, &mask)?;
        self.mask = mask;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.x_latent.dim();
        if self.x_observed.dim() != dim || self.mask.dim() != dim {
            return Err(CutsError::Shape(format!(
                "latent {:?}, observed {:?}, mask {:?}",
                dim,
                self.x_observed.dim(),
                self.mask.dim()
            )));
        }
        if dim.1 < 2 {
            return Err(CutsError::Config(format!("need at least 2 series, got {}", dim.1)));
        }
        for ((x, y), &o) in self.x_latent.iter().zip(&self.x_observed).zip(&self.mask) {
            if o && x.to_bits() != y.to_bits() {
                return Err(CutsError::Config("observed copy differs from latent on an observed entry".into()));
            }
        }
        if let Some(s) = &self.truth_summary {
            if s.dim() != (dim.1, dim.1) {
                return Err(CutsError::Shape(format!("summary truth {:?} for {} series", s.dim(), dim.1)));
            }
        }
        if let Some(l) = &self.truth_lagged {
            let (_, a, b) = l.dim();
            if a != dim.1 || b != dim.1 {
                return Err(CutsError::Shape(format!("lagged truth {:?} for {} series", l.dim(), dim.1)));
            }
            if dim.0 <= l.dim().0 {
                return Err(CutsError::Config(format!("length {} must exceed tau_max {}", dim.0, l.dim().0)));
            }
            if let Some(s) = &self.truth_summary {
                if *s != summarize_truth(l) {
                    return Err(CutsError::Config("summary truth is not the lag-maximum of lagged truth".into()));
                }
            }
        }
        Ok(())
    }
}

/// Lag-maximum of a lagged adjacency.
pub fn summarize_truth(lagged: &Array3<bool>) -> Array2<bool> {
    let (_, n, m) = lagged.dim();
    let mut out = Array2::from_elem((n, m), false);
    for slice in lagged.axis_iter(Axis(0)) {
        out.zip_mut_with(&slice, |a, &b| *a |= b);
    }
    out
}

pub(crate) fn param(v: impl Into<serde_json::Value>) -> serde_json::Value {
    v.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn summary_is_lag_maximum() {
        let mut lagged = Array3::from_elem((3, 2, 2), false);
        lagged[[2, 0, 1]] = true;
        lagged[[0, 1, 1]] = true;
        assert_eq!(summarize_truth(&lagged), array![[false, true], [false, true]]);
    }

    #[test]
    fn validate_flags_shape_mismatch() {
        let mut ds = TimeSeriesDataset::fully_observed(Array2::zeros((5, 2)), DatasetMeta::default());
        ds.mask = Array2::from_elem((5, 3), true);
        assert!(matches!(ds.validate(), Err(CutsError::Shape(_))));
    }
}
