use std::path::{Path, PathBuf};

use anyhow::Context;
use cuts::datagen::{load_dataset, load_truth, save_dataset, write_series_csv, TimeSeriesDataset};
use cuts::eval::{auroc, auroc_temporal, mse_curve_svg, roc_svg, sweep as run_sweep, SweepPlan};
use cuts::model::{read_matrix_csv, write_graph_csv, CausalProbabilityGraph};
use cuts::train::{Ablation, Checkpoint, RunConfig, RunOutput, Trainer};
use cuts::{CutsError, Scalar};
use ndarray::Array2;

use crate::config::{ConfigError, ExperimentConfig};
use crate::Common;

fn load_config(common: &Common) -> anyhow::Result<ExperimentConfig> {
    match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(common: &Common, cfg: &ExperimentConfig, root: &Path, command: &str) -> PathBuf {
    common.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| root.join(command))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CutsError::Io { path: dir.to_path_buf(), source: e })?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(|e| CutsError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn write_echo(dir: &Path, cfg: &ExperimentConfig, run: &RunConfig) -> anyhow::Result<()> {
    let text = cfg.resolved(run)?.to_toml()?;
    write_file(&dir.join("config.toml"), &text)
}

pub fn generate(common: &Common, root: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let mut cfg = load_config(common)?;
    let seed = seed.or(cfg.first_seed()).unwrap_or(0);
    cfg.seeds = vec![seed];
    let dir = out_dir(common, &cfg, root, "dataset");
    let ds = cfg.recipe().generate(seed)?;
    save_dataset(&ds, &dir)?;
    write_echo(&dir, &cfg, &cfg.run_config()?)?;
    let edges = ds.truth_summary.as_ref().map_or(0, |t| t.iter().filter(|&&b| b).count());
    println!(
        "wrote {} ({} series x {} steps, {:.1}% observed, {edges} true edges)",
        dir.display(),
        ds.n_series(),
        ds.len(),
        100.0 * ds.observed_fraction()
    );
    Ok(())
}

pub struct RunFlags {
    pub dataset: Option<PathBuf>,
    pub seed: Option<u64>,
    pub ablation: Option<Ablation>,
    pub plots: bool,
    pub checkpoint: bool,
    pub single_precision: bool,
}

pub fn run(common: &Common, root: &Path, flags: RunFlags) -> anyhow::Result<()> {
    let mut cfg = load_config(common)?;
    let mut run_cfg = cfg.run_config()?;
    let seed = flags.seed.or(cfg.first_seed()).unwrap_or(run_cfg.seed);
    run_cfg.seed = seed;
    cfg.seeds = vec![seed];
    if let Some(a) = flags.ablation {
        run_cfg = run_cfg.with_ablation(a);
    }
    let ds = match &flags.dataset {
        Some(dir) => load_dataset(dir)?,
        None => cfg.recipe().generate(seed)?,
    };
    let dir = out_dir(common, &cfg, root, "run");
    create_dir(&dir)?;
    write_echo(&dir, &cfg, &run_cfg)?;
    if let Some(d) = &flags.dataset {
        write_file(&dir.join("dataset.txt"), &format!("{}\n", d.display()))?;
    }

    let ckpt = flags.checkpoint.then(|| dir.join("checkpoint.json"));
    let out = if flags.single_precision {
        train::<f32>(&ds, run_cfg, ckpt.as_deref())?
    } else {
        train::<f64>(&ds, run_cfg, ckpt.as_deref())?
    };

    out.report.save(&dir)?;
    out.cpg.save(dir.join("cpg.json"))?;
    write_graph_csv(&out.cpg.aggregate(), dir.join("graph.csv"))?;
    write_series_csv(&out.imputed, dir.join("imputed.csv"))?;
    if flags.plots {
        write_file(&dir.join("mse_curve.svg"), &mse_curve_svg(&out.report.mse_trace))?;
        if let Some(truth) = &ds.truth_summary {
            let scores: Vec<f64> = out.cpg.aggregate().iter().copied().collect();
            let labels: Vec<bool> = truth.iter().copied().collect();
            match roc_svg(&scores, &labels) {
                Ok(svg) => write_file(&dir.join("roc.svg"), &svg)?,
                Err(e) => log::warn!("no ROC plot: {e}"),
            }
        }
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "auroc {} (off-diagonal {}), temporal {}, final mse {}, {:.1}s -> {}",
        fmt(out.report.auroc_summary),
        fmt(out.report.auroc_summary_offdiag),
        fmt(out.report.auroc_temporal),
        fmt(out.report.final_mse()),
        out.report.wall_clock_secs,
        dir.display()
    );
    Ok(())
}

fn train<T: Scalar>(ds: &TimeSeriesDataset, config: RunConfig, checkpoint: Option<&Path>) -> anyhow::Result<RunOutput> {
    let mut trainer = Trainer::<T>::new(ds, config.clone())?;
    if let Some(path) = checkpoint.filter(|p| p.exists()) {
        let ck = Checkpoint::load(path)?;
        if ck.config != config {
            anyhow::bail!(ConfigError(format!("{} was written under different settings", path.display())));
        }
        log::info!("resuming from epoch {}", ck.epoch);
        trainer = trainer.with_state(ck.restore()?)?;
    }
    let total = config.total_epochs();
    let out = trainer.run_with(|t| {
        let s = t.state();
        log::debug!("epoch {}/{total}", s.epoch);
        match checkpoint {
            Some(path) => Checkpoint::capture(t.config(), s).save(path),
            None => Ok(()),
        }
    })?;
    Ok(out)
}

pub fn sweep(
    common: &Common,
    root: &Path,
    seeds: Option<Vec<u64>>,
    levels: Option<Vec<f64>>,
    ablations: Option<Vec<Ablation>>,
    jobs: usize,
) -> anyhow::Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    if let Some(l) = levels {
        cfg.levels = l;
    }
    if let Some(a) = ablations {
        cfg.ablations = a;
    }
    cfg.check_seeds()?;
    let run_cfg = cfg.run_config()?;
    let dir = out_dir(common, &cfg, root, "sweep");
    create_dir(&dir)?;
    write_echo(&dir, &cfg, &run_cfg)?;
    let plan = SweepPlan {
        recipe: cfg.recipe(),
        config: run_cfg,
        seeds: cfg.seeds.clone(),
        levels: cfg.levels.clone(),
        ablations: cfg.ablations.clone(),
    };
    let outcome = run_sweep(&plan, &dir, jobs)?;
    for s in &outcome.summary {
        let pm = |v: Option<(f64, f64)>| v.map_or("n/a".to_string(), |(m, sd)| format!("{m:.4} ± {sd:.4}"));
        println!(
            "level {} {:<22} auroc {}  mse {}  ({} ok, {} failed)",
            s.level,
            s.ablation.name(),
            pm(s.auroc),
            pm(s.final_mse),
            s.runs,
            s.failed
        );
    }
    let failed = outcome.rows.iter().filter(|r| r.error.is_some()).count();
    if outcome.all_failed() {
        anyhow::bail!(CutsError::State(format!("all {failed} sweep cells failed")));
    }
    println!("{} cells ({failed} failed) -> {}", outcome.rows.len(), dir.join("sweep.csv").display());
    Ok(())
}

fn read_graph(path: &Path) -> anyhow::Result<(Array2<f64>, Option<ndarray::Array3<f64>>)> {
    if path.extension().is_some_and(|e| e == "json") {
        let cpg = CausalProbabilityGraph::<f64>::load(path)?;
        Ok((cpg.aggregate(), Some(cpg.probabilities())))
    } else {
        Ok((read_matrix_csv(path)?, None))
    }
}

pub fn eval(graph: &Path, truth: &Path, offdiag: bool) -> anyhow::Result<()> {
    let (scores, probs) = read_graph(graph)?;
    let (lagged, summary) = if truth.extension().is_some_and(|e| e == "json") {
        load_truth(truth)?
    } else {
        (None, Some(read_matrix_csv(truth)?.mapv(|v| v != 0.0)))
    };
    let summary = summary.with_context(|| format!("{} holds no summary graph", truth.display()))?;
    let mut out = serde_json::Map::new();
    out.insert("auroc_summary".into(), auroc(&scores, &summary, !offdiag)?.into());
    if let (Some(p), Some(l)) = (probs, lagged) {
        out.insert("auroc_temporal".into(), auroc_temporal(&p, &l)?.into());
    }
    println!("{}", serde_json::Value::Object(out));
    Ok(())
}
