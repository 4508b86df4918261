//! Graph scoring, imputation quality, run reports, sweeps and plots.

mod metrics;
mod plot;
mod report;
mod sweep;

pub use metrics::{auroc, auroc_scores, auroc_temporal, imputation_mse};
pub use plot::{line_chart, mse_curve_svg, roc_curve, roc_svg, Series};
pub use report::{RunReport, RunTiming};
pub use sweep::{mean_sd, rows_csv, summarize, summary_csv, sweep, SweepCell, SweepOutcome, SweepPlan, SweepRow, SweepSummary};
