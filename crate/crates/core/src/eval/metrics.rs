use ndarray::{Array2, Array3};

use crate::error::{CutsError, Result};

/// Area under the ROC curve in its Mann-Whitney form: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
///
/// Computed from mid-ranks in `O(n log n)`.
pub fn auroc_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(CutsError::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(bad) = scores.iter().position(|s| s.is_nan()) {
        return Err(CutsError::UndefinedMetric(format!("score {bad} is NaN")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CutsError::UndefinedMetric(format!(
            "AUROC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share their mean, 1-based
        let mid = (start + end + 1) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += mid * pos_in_group as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Summary-graph AUROC over an N×N score matrix.
pub fn auroc(scores: &Array2<f64>, truth: &Array2<bool>, include_diagonal: bool) -> Result<f64> {
    if scores.dim() != truth.dim() || scores.nrows() != scores.ncols() {
        return Err(CutsError::Shape(format!("scores {:?} vs truth {:?}", scores.dim(), truth.dim())));
    }
    let mut s = Vec::with_capacity(scores.len());
    let mut l = Vec::with_capacity(scores.len());
    for ((i, j), &v) in scores.indexed_iter() {
        if include_diagonal || i != j {
            s.push(v);
            l.push(truth[[i, j]]);
        }
    }
    auroc_scores(&s, &l)
}

/// AUROC over every lag-resolved entry.
pub fn auroc_temporal(probs: &Array3<f64>, truth: &Array3<bool>) -> Result<f64> {
    if probs.dim() != truth.dim() {
        return Err(CutsError::Shape(format!("probabilities {:?} vs truth {:?}", probs.dim(), truth.dim())));
    }
    let s: Vec<f64> = probs.iter().copied().collect();
    let l: Vec<bool> = truth.iter().copied().collect();
    auroc_scores(&s, &l)
}

/// Mean squared error over unobserved entries; zero when nothing is missing.
pub fn imputation_mse(x_work: &Array2<f64>, x_latent: &Array2<f64>, mask: &Array2<bool>) -> Result<f64> {
    if x_work.dim() != x_latent.dim() || mask.dim() != x_latent.dim() {
        return Err(CutsError::Shape(format!(
            "imputed {:?}, latent {:?}, mask {:?}",
            x_work.dim(),
            x_latent.dim(),
            mask.dim()
        )));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for ((a, b), &o) in x_work.iter().zip(x_latent).zip(mask) {
        if !o {
            sum += (a - b) * (a - b);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}
