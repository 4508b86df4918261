//! Multi-seed, multi-ablation grids with resumable per-cell outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunReport;
use crate::datagen::DatasetRecipe;
use crate::error::{CutsError, Result};
use crate::fsutil::write_text;
use crate::train::{run_cuts, Ablation, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub recipe: DatasetRecipe,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    /// Missingness levels; empty means the recipe's own level.
    pub levels: Vec<f64>,
    /// Empty means the full method only.
    pub ablations: Vec<Ablation>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub level: f64,
    pub ablation: Ablation,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub mechanism: String,
    pub level: f64,
    pub ablation: Ablation,
    pub seed: u64,
    pub auroc: Option<f64>,
    pub auroc_temporal: Option<f64>,
    pub final_mse: Option<f64>,
    pub wall_clock: f64,
    /// `None` on success.
    pub error: Option<String>,
    /// Loaded from a previous invocation rather than computed.
    pub resumed: bool,
}

/// Mean and sample standard deviation over the successful seeds of one
/// (level, ablation) group.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub level: f64,
    pub ablation: Ablation,
    pub runs: usize,
    pub failed: usize,
    pub auroc: Option<(f64, f64)>,
    pub final_mse: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

impl SweepOutcome {
    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_some())
    }
}

/// Mean and sample standard deviation; a single value has deviation 0.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

impl SweepPlan {
    pub fn cells(&self) -> Vec<SweepCell> {
        let levels = if self.levels.is_empty() { vec![self.recipe.missing.level()] } else { self.levels.clone() };
        let ablations = if self.ablations.is_empty() { vec![Ablation::Full] } else { self.ablations.clone() };
        let mut cells = Vec::new();
        for &level in &levels {
            for &ablation in &ablations {
                for &seed in &self.seeds {
                    cells.push(SweepCell { level, ablation, seed });
                }
            }
        }
        cells
    }

    pub fn cell_dir(&self, out_dir: &Path, cell: &SweepCell) -> PathBuf {
        out_dir
            .join("cells")
            .join(format!("{}-{}-{}", self.recipe.generator.name(), self.recipe.missing.name(), cell.level))
            .join(cell.ablation.name())
            .join(format!("seed-{}", cell.seed))
    }
}

fn run_cell(plan: &SweepPlan, cell: &SweepCell, dir: &Path) -> Result<RunReport> {
    let recipe = DatasetRecipe { generator: plan.recipe.generator.clone(), missing: plan.recipe.missing.with_level(cell.level)? };
    let ds = recipe.generate(cell.seed)?;
    let config = RunConfig { seed: cell.seed, ..plan.config.clone() }.with_ablation(cell.ablation);
    let out = run_cuts::<f64>(&ds, config)?;
    std::fs::create_dir_all(dir).map_err(|e| CutsError::io(dir, e))?;
    out.report.save(dir)?;
    Ok(out.report)
}

/// Runs every cell not already completed under `out_dir`, using `jobs`
/// worker threads, and writes `sweep.csv` and `sweep_summary.csv`.
/// Failing cells are recorded and do not stop the sweep.
pub fn sweep(plan: &SweepPlan, out_dir: &Path, jobs: usize) -> Result<SweepOutcome> {
    if plan.seeds.is_empty() {
        return Err(CutsError::Config("a sweep needs at least one seed".into()));
    }
    plan.config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CutsError::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CutsError::Config(format!("thread pool: {e}")))?;
    let cells = plan.cells();
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let dir = plan.cell_dir(out_dir, cell);
                let (result, resumed) = match RunReport::load(&dir) {
                    Ok(report) => (Ok(report), true),
                    Err(_) => (run_cell(plan, cell, &dir), false),
                };
                let mut row = SweepRow {
                    dataset: plan.recipe.generator.name().to_string(),
                    mechanism: plan.recipe.missing.name().to_string(),
                    level: cell.level,
                    ablation: cell.ablation,
                    seed: cell.seed,
                    auroc: None,
                    auroc_temporal: None,
                    final_mse: None,
                    wall_clock: 0.0,
                    error: None,
                    resumed,
                };
                match result {
                    Ok(r) => {
                        row.auroc = r.auroc_summary;
                        row.auroc_temporal = r.auroc_temporal;
                        row.final_mse = r.final_mse();
                        row.wall_clock = r.wall_clock_secs;
                    }
                    Err(e) => {
                        log::warn!("cell {:?} failed: {e}", cell);
                        row.error = Some(e.to_string());
                    }
                }
                row
            })
            .collect()
    });
    let summary = summarize(&rows);
    write_text(&out_dir.join("sweep.csv"), &rows_csv(&rows))?;
    write_text(&out_dir.join("sweep_summary.csv"), &summary_csv(&summary))?;
    Ok(SweepOutcome { rows, summary })
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut groups: Vec<(f64, Ablation)> = Vec::new();
    for r in rows {
        if !groups.contains(&(r.level, r.ablation)) {
            groups.push((r.level, r.ablation));
        }
    }
    groups
        .into_iter()
        .map(|(level, ablation)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.level == level && r.ablation == ablation).collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.error.is_none()).collect();
            let aurocs: Vec<f64> = ok.iter().filter_map(|r| r.auroc).collect();
            let mses: Vec<f64> = ok.iter().filter_map(|r| r.final_mse).collect();
            SweepSummary {
                level,
                ablation,
                runs: ok.len(),
                failed: group.len() - ok.len(),
                auroc: mean_sd(&aurocs),
                final_mse: mean_sd(&mses),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rows_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("dataset,mechanism,level,ablation,seed,auroc,auroc_temporal,final_mse,wall_clock,status\n");
    for r in rows {
        let status = r.error.as_deref().map_or("ok".to_string(), |e| csv_field(&format!("failed: {e}")));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3},{}",
            r.dataset,
            r.mechanism,
            r.level,
            r.ablation.name(),
            r.seed,
            opt(r.auroc),
            opt(r.auroc_temporal),
            opt(r.final_mse),
            r.wall_clock,
            status
        );
    }
    out
}

pub fn summary_csv(summary: &[SweepSummary]) -> String {
    let mut out = String::from("level,ablation,runs,failed,auroc_mean,auroc_sd,final_mse_mean,final_mse_sd\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.level,
            s.ablation.name(),
            s.runs,
            s.failed,
            opt(s.auroc.map(|a| a.0)),
            opt(s.auroc.map(|a| a.1)),
            opt(s.final_mse.map(|a| a.0)),
            opt(s.final_mse.map(|a| a.1)),
        );
    }
    out
}
