//! Dataset directory layout:
//!
//! * `data.csv`  - header `t,x_1,...,x_N`, latent values in `%.16e`
//! * `mask.csv`  - same header, entries `0`/`1`
//! * `truth.json` - `{ "n", "tau_max", "lagged", "summary" }` with 0/1 arrays
//! * `meta.json` - generator name, seed, parameters and missing mechanism
//!
//! The observed working copy is not stored; it is rebuilt from the latent
//! values and the mask on load.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{zoh_fill, DatasetMeta, TimeSeriesDataset};
use crate::error::{CutsError, Result};
use crate::fsutil::{read_json, write_json, write_text};

#[derive(Debug, Serialize, Deserialize)]
struct TruthFile {
    n: usize,
    tau_max: Option<usize>,
    lagged: Option<Vec<Vec<Vec<u8>>>>,
    summary: Option<Vec<Vec<u8>>>,
}

pub fn save_dataset(ds: &TimeSeriesDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| CutsError::io(dir, e))?;
    let n = ds.n_series();

    write_text(&dir.join("data.csv"), &render_csv(n, ds.x_latent.rows().into_iter().map(|r| {
        r.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>()
    })))?;
    write_text(&dir.join("mask.csv"), &render_csv(n, ds.mask.rows().into_iter().map(|r| {
        r.iter().map(|&o| if o { "1".to_string() } else { "0".to_string() }).collect::<Vec<_>>()
    })))?;

    let truth = TruthFile {
        n,
        tau_max: ds.truth_lagged.as_ref().map(|l| l.dim().0),
        lagged: ds.truth_lagged.as_ref().map(|l| {
            l.outer_iter()
                .map(|slice| slice.rows().into_iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect())
                .collect()
        }),
        summary: ds
            .truth_summary
            .as_ref()
            .map(|s| s.rows().into_iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()),
    };
    write_json(&dir.join("truth.json"), &truth)?;
    write_json(&dir.join("meta.json"), &ds.meta)?;
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<TimeSeriesDataset> {
    let dir = dir.as_ref();
    let data_path = dir.join("data.csv");
    let x_latent = parse_csv(&data_path, |s| s.parse::<f64>().map_err(|e| e.to_string()))?;
    let mask_path = dir.join("mask.csv");
    let mask = parse_csv(&mask_path, |s| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("mask entry must be 0 or 1, got {other:?}")),
    })?;
    if mask.dim() != x_latent.dim() {
        return Err(CutsError::Shape(format!(
            "{} is {:?} but {} is {:?}",
            mask_path.display(),
            mask.dim(),
            data_path.display(),
            x_latent.dim()
        )));
    }
    let n = x_latent.ncols();

    let truth_path = dir.join("truth.json");
    let (truth_lagged, truth_summary) = if truth_path.exists() {
        let truth: TruthFile = read_json(&truth_path)?;
        if truth.n != n {
            return Err(CutsError::Shape(format!("{} declares n = {}, data has {n}", truth_path.display(), truth.n)));
        }
        let lagged = truth.lagged.map(|l| nested3(&truth_path, l, n)).transpose()?;
        let summary = truth.summary.map(|s| nested2(&truth_path, s, n)).transpose()?;
        (lagged, summary)
    } else {
        (None, None)
    };

    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = if meta_path.exists() { read_json(&meta_path)? } else { DatasetMeta::default() };

    let ds = TimeSeriesDataset {
        x_observed: zoh_fill(&x_latent, &mask)?,
        x_latent,
        mask,
        truth_lagged,
        truth_summary,
        meta,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a series in the `data.csv` layout.
pub fn write_series_csv(x: &Array2<f64>, path: impl AsRef<Path>) -> Result<()> {
    let text = render_csv(x.ncols(), x.rows().into_iter().map(|r| r.iter().map(|v| format!("{v:.16e}")).collect()));
    write_text(path.as_ref(), &text)
}

/// Reads a series in the `data.csv` layout.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    parse_csv(path.as_ref(), |s| s.parse::<f64>().map_err(|e| e.to_string()))
}

/// Ground truth from a `truth.json` file: `(lagged, summary)`. When only the
/// lagged form is present the summary is derived from it.
pub fn load_truth(path: impl AsRef<Path>) -> Result<(Option<Array3<bool>>, Option<Array2<bool>>)> {
    let path = path.as_ref();
    let truth: TruthFile = read_json(path)?;
    let lagged = truth.lagged.map(|l| nested3(path, l, truth.n)).transpose()?;
    let mut summary = truth.summary.map(|s| nested2(path, s, truth.n)).transpose()?;
    if summary.is_none() {
        summary = lagged.as_ref().map(super::summarize_truth);
    }
    Ok((lagged, summary))
}

fn render_csv(n: usize, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for (t, row) in rows.enumerate() {
        out.push_str(&t.to_string());
        for cell in row {
            out.push(',');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}

fn parse_csv<V: Clone>(path: &Path, cell: impl Fn(&str) -> std::result::Result<V, String>) -> Result<Array2<V>> {
    let text = fs::read_to_string(path).map_err(|e| CutsError::io(path, e))?;
    let err = |line: usize, msg: String| CutsError::Parse { path: PathBuf::from(path), line, msg };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(err(1, format!("header must be t,x_1..x_N, got {header:?}")));
    }
    for (k, name) in cols.iter().enumerate().skip(1) {
        if *name != format!("x_{k}") {
            return Err(err(1, format!("column {} named {name:?}, expected x_{k}", k + 1)));
        }
    }
    let n = cols.len() - 1;
    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(err(lineno, format!("expected {} fields, found {}", n + 1, fields.len())));
        }
        if fields[0].parse::<usize>() != Ok(rows) {
            return Err(err(lineno, format!("time index {:?}, expected {rows}", fields[0])));
        }
        for (k, f) in fields[1..].iter().enumerate() {
            values.push(cell(f).map_err(|m| err(lineno, format!("column {}: {m}", k + 2)))?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, n), values).map_err(|e| err(0, e.to_string()))
}

fn nested2(path: &Path, rows: Vec<Vec<u8>>, n: usize) -> Result<Array2<bool>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CutsError::Shape(format!("{}: summary truth must be {n}x{n}", path.display())));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j] != 0))
}

fn nested3(path: &Path, lags: Vec<Vec<Vec<u8>>>, n: usize) -> Result<Array3<bool>> {
    let tau = lags.len();
    if tau == 0 || lags.iter().any(|s| s.len() != n || s.iter().any(|r| r.len() != n)) {
        return Err(CutsError::Shape(format!("{}: lagged truth must be tau x {n} x {n}", path.display())));
    }
    Ok(Array3::from_shape_fn((tau, n, n), |(l, i, j)| lags[l][i][j] != 0))
}
