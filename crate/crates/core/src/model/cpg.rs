use std::path::Path;

use ndarray::{s, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::fsutil::{read_json, write_json};
use crate::error::{CutsError, Result};
use crate::numgrad::logistic;
use crate::scalar::Scalar;

/// Lag-resolved edge logits `theta[[tau - 1, i, j]]` for "series `i` at lag
/// `tau` drives series `j`", with edge probabilities `logistic(theta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalProbabilityGraph<T> {
    theta: Array3<T>,
}

#[derive(Serialize, Deserialize)]
struct CpgFile {
    tau_max: usize,
    n: usize,
    theta: Vec<Vec<Vec<f64>>>,
}

impl<T: Scalar> CausalProbabilityGraph<T> {
    /// Every logit set to `init`.
    pub fn new(tau_max: usize, n: usize, init: T) -> Result<Self> {
        if tau_max == 0 || n == 0 {
            return Err(CutsError::Config(format!("graph needs tau_max >= 1 and n >= 1, got {tau_max}, {n}")));
        }
        Ok(CausalProbabilityGraph { theta: Array3::from_elem((tau_max, n, n), init) })
    }

    pub fn from_logits(theta: Array3<T>) -> Result<Self> {
        let (tau, n, m) = theta.dim();
        if tau == 0 || n == 0 || n != m {
            return Err(CutsError::Shape(format!("logits must be tau×N×N, got {:?}", theta.dim())));
        }
        Ok(CausalProbabilityGraph { theta })
    }

    pub fn tau_max(&self) -> usize {
        self.theta.dim().0
    }

    pub fn n(&self) -> usize {
        self.theta.dim().1
    }

    pub fn theta(&self) -> &Array3<T> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Array3<T> {
        &mut self.theta
    }

    /// Elementwise logistic of the logits.
    pub fn probabilities(&self) -> Array3<T> {
        self.theta.mapv(logistic)
    }

    /// Summary adjacency: maximum probability over lags.
    pub fn aggregate(&self) -> Array2<T> {
        aggregate_graph(&self.probabilities())
    }

    /// Logits feeding target `j`, flattened to one row in window order
    /// (`k = (tau - 1) * N + i`).
    pub fn target_logits(&self, j: usize) -> Array2<T> {
        let col = self.theta.slice(s![.., .., j]);
        let flat: Vec<T> = col.iter().copied().collect();
        Array2::from_shape_vec((1, flat.len()), flat).expect("row shape")
    }

    pub fn set_target_logits(&mut self, j: usize, row: &Array2<T>) -> Result<()> {
        let (tau, n) = (self.tau_max(), self.n());
        if row.dim() != (1, tau * n) {
            return Err(CutsError::Shape(format!("target row {:?}, expected 1x{}", row.dim(), tau * n)));
        }
        let mut col = self.theta.slice_mut(s![.., .., j]);
        for (dst, src) in col.iter_mut().zip(row.iter()) {
            *dst = *src;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = CpgFile {
            tau_max: self.tau_max(),
            n: self.n(),
            theta: self
                .theta
                .outer_iter()
                .map(|slice| slice.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect())
                .collect(),
        };
        write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: CpgFile = read_json(path)?;
        let (tau, n) = (file.tau_max, file.n);
        if file.theta.len() != tau || file.theta.iter().any(|s| s.len() != n || s.iter().any(|r| r.len() != n)) {
            return Err(CutsError::Shape(format!("{}: theta is not {tau}x{n}x{n}", path.display())));
        }
        Self::from_logits(Array3::from_shape_fn((tau, n, n), |(l, i, j)| T::of(file.theta[l][i][j])))
    }
}

/// `a[[i, j]] = max_tau probs[[tau, i, j]]`.
pub fn aggregate_graph<T: Scalar>(probs: &Array3<T>) -> Array2<T> {
    let (_, n, m) = probs.dim();
    let mut out = Array2::from_elem((n, m), T::neg_infinity());
    for slice in probs.axis_iter(Axis(0)) {
        out.zip_mut_with(&slice, |a, &b| *a = a.max(b));
    }
    out
}

/// Writes an N×N score matrix as plain CSV without header.
pub fn write_graph_csv<T: Scalar>(graph: &Array2<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in graph.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CutsError::io(path, e))
}

/// Reads a square numeric CSV matrix (no header).
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CutsError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CutsError::Parse { path: path.into(), line: idx + 1, msg: e.to_string() })?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CutsError::Shape(format!("{}: expected a square matrix", path.display())));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}
