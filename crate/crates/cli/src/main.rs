mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cuts::train::Ablation;
use cuts::CutsError;

use config::ConfigError;

#[derive(Parser)]
#[command(name = "cuts", version, about = "Causal discovery and imputation for irregular time series")]
struct Cli {
    /// Root for output directories when neither --out nor `out_dir` is given.
    #[arg(long, env = "CUTS_OUTPUT_ROOT", default_value = "cuts-out", global = true)]
    output_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Experiment config (TOML); built-in VAR defaults when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on one dataset and write the report, graph and imputed series.
    Run {
        #[command(flatten)]
        common: Common,
        /// Existing dataset directory; generated from the config when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_ablation)]
        ablation: Option<Ablation>,
        /// Also write mse_curve.svg and roc.svg.
        #[arg(long)]
        plots: bool,
        /// Save checkpoint.json after every epoch and resume from it if present.
        #[arg(long)]
        checkpoint: bool,
        /// Train in single precision.
        #[arg(long)]
        f32: bool,
    },
    /// Grid over seeds, missingness levels and ablations.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_ablation)]
        ablations: Option<Vec<Ablation>>,
        /// Cells run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score a graph against ground truth; prints JSON.
    Eval {
        /// graph.csv (N×N, no header) or cpg.json.
        #[arg(long)]
        graph: PathBuf,
        /// truth.json of a dataset directory, or an N×N 0/1 csv.
        #[arg(long)]
        truth: PathBuf,
        /// Exclude self-edges.
        #[arg(long)]
        offdiag: bool,
    },
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    Ablation::parse(s).map_err(|e| e.to_string())
}

/// 0 success, 1 invalid input, 2 runtime abort, 3 file system.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        return 1;
    }
    if let Some(e) = err.chain().find_map(|e| e.downcast_ref::<CutsError>()) {
        return if e.is_io() {
            3
        } else if e.is_validation() {
            1
        } else {
            2
        };
    }
    if err.chain().any(|e| e.is::<std::io::Error>()) {
        return 3;
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let root = cli.output_root;
    let result = match cli.command {
        Command::Generate { common, seed } => commands::generate(&common, &root, seed),
        Command::Run { common, dataset, seed, ablation, plots, checkpoint, f32 } => commands::run(
            &common,
            &root,
            commands::RunFlags { dataset, seed, ablation, plots, checkpoint, single_precision: f32 },
        ),
        Command::Sweep { common, seeds, levels, ablations, jobs } => {
            commands::sweep(&common, &root, seeds, levels, ablations, jobs)
        }
        Command::Eval { graph, truth, offdiag } => commands::eval(&graph, &truth, offdiag),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
