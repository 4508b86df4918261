use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::DatasetMeta;
use crate::error::Result;
use crate::fsutil::{read_json, write_json};
use crate::train::RunConfig;

/// Outcome of one run. Serialized as `report.json`; everything in it is a
/// function of the dataset and configuration, so same-seed runs produce
/// identical files. Wall-clock time lives in `timing.json` next to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: RunConfig,
    pub dataset: DatasetMeta,
    /// Summary-graph AUROC with self-edges included; absent without truth.
    pub auroc_summary: Option<f64>,
    pub auroc_summary_offdiag: Option<f64>,
    pub auroc_temporal: Option<f64>,
    /// Imputation MSE against the latent series after each epoch.
    pub mse_trace: Vec<f64>,
    pub loss_pred_trace: Vec<f64>,
    pub loss_graph_trace: Vec<f64>,
    /// Lag-maximum edge probabilities, `final_graph[i][j]` for `i -> j`.
    pub final_graph: Vec<Vec<f64>>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn final_mse(&self) -> Option<f64> {
        self.mse_trace.last().copied()
    }

    /// Writes `report.json` and `timing.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("report.json"), self)?;
        write_json(&dir.join("timing.json"), &RunTiming { wall_clock_secs: self.wall_clock_secs })
    }

    /// Reads a saved report; a missing timing file leaves the time at zero.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut report: RunReport = read_json(&dir.join("report.json"))?;
        let timing = dir.join("timing.json");
        if timing.exists() {
            report.wall_clock_secs = read_json::<RunTiming>(&timing)?.wall_clock_secs;
        }
        Ok(report)
    }
}
