use cuts::datagen::{apply_random_missing, gen_var, zoh_fill, TimeSeriesDataset};
use cuts::train::{prediction_loss, Ablation, Checkpoint, Phase, RunConfig, Trainer};
use cuts::{run_cuts, CutsError};
use ndarray::array;

fn small_config(seed: u64) -> RunConfig {
    RunConfig {
        n1: 2,
        n2: 3,
        n3: 2,
        batch_size: 32,
        hidden_features: 16,
        lr_data: 1e-3,
        seed,
        ..RunConfig::var()
    }
}

fn small_dataset(p: f64) -> TimeSeriesDataset {
    let ds = gen_var(4, 120, 3, 0.4, 0.1, 11).unwrap();
    apply_random_missing(ds, p, 12).unwrap()
}

#[test]
fn masked_loss_hand_example() {
    // one series, o = [1, 0, 1], squared errors [0, 9, 1]: (0 + 1) / (2/3) = 1.5
    let pred = array![[1.0], [3.0], [2.0]];
    let target = array![[1.0], [0.0], [3.0]];
    let mask = array![[true], [false], [true]];
    assert!((prediction_loss(&pred, &target, &mask).unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn same_seed_gives_identical_report() {
    let ds = small_dataset(0.3);
    let a = run_cuts::<f64>(&ds, small_config(7)).unwrap();
    let b = run_cuts::<f64>(&ds, small_config(7)).unwrap();
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    assert_eq!(a.imputed, b.imputed);
    let c = run_cuts::<f64>(&ds, small_config(8)).unwrap();
    assert_ne!(a.report.final_graph, c.report.final_graph);
}

#[test]
fn traces_cover_every_epoch() {
    let ds = small_dataset(0.3);
    let cfg = small_config(1);
    let out = run_cuts::<f64>(&ds, cfg.clone()).unwrap();
    assert_eq!(out.report.mse_trace.len(), cfg.n1 + cfg.n2 + cfg.n3);
    assert_eq!(out.report.loss_pred_trace.len(), cfg.total_epochs());
    let auroc = out.report.auroc_summary.unwrap();
    assert!((0.0..=1.0).contains(&auroc));
    let short = run_cuts::<f64>(&ds, cfg.clone().with_ablation(Ablation::NoFinetune)).unwrap();
    assert_eq!(short.report.mse_trace.len(), cfg.n1 + cfg.n2);
}

#[test]
fn observed_entries_and_warm_up_are_immutable() {
    let ds = small_dataset(0.4);
    let mut tr = Trainer::<f64>::new(&ds, small_config(3)).unwrap();
    let init = tr.initial_fill().clone();
    while tr.phase(tr.state().epoch) == Phase::WarmUp {
        tr.step_epoch().unwrap();
        assert_eq!(tr.state().x_work, init);
    }
    let mut moved = false;
    while !tr.is_finished() {
        tr.step_epoch().unwrap();
        for ((w, i), &o) in tr.state().x_work.iter().zip(&init).zip(&ds.mask) {
            if o {
                assert_eq!(w.to_bits(), i.to_bits());
            } else if w != i {
                moved = true;
            }
        }
        let imputed = tr.imputed();
        for ((v, x), &o) in imputed.iter().zip(&ds.x_latent).zip(&ds.mask) {
            if o {
                assert_eq!(v, x);
            }
        }
    }
    assert!(moved, "imputation phase should change some missing entries");
}

#[test]
fn finetune_does_not_move_imputed_values() {
    let ds = small_dataset(0.4);
    let cfg = small_config(4);
    let mut tr = Trainer::<f64>::new(&ds, cfg.clone()).unwrap();
    while tr.phase(tr.state().epoch) != Phase::FineTune {
        tr.step_epoch().unwrap();
    }
    let frozen = tr.state().x_work.clone();
    while !tr.is_finished() {
        tr.step_epoch().unwrap();
    }
    assert_eq!(tr.state().x_work, frozen);
    assert!(matches!(Trainer::<f64>::new(&ds, cfg).unwrap().finetune_epoch(), Err(CutsError::State(_))));
}

#[test]
fn no_imputation_keeps_initial_fill() {
    let ds = small_dataset(0.4);
    let out = run_cuts::<f64>(&ds, small_config(5).with_ablation(Ablation::NoImputation)).unwrap();
    // missing entries keep the zero-order-hold fill, up to the scaling round trip
    let zoh = zoh_fill(&ds.x_observed, &ds.mask).unwrap();
    for (a, b) in out.imputed.iter().zip(&zoh) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
    let first = out.report.mse_trace[0];
    assert!(out.report.mse_trace.iter().all(|&m| m == first));
}

#[test]
fn resume_from_checkpoint_matches_uninterrupted_run() {
    let ds = small_dataset(0.3);
    let cfg = small_config(9);
    let straight = run_cuts::<f64>(&ds, cfg.clone()).unwrap();

    let mut tr = Trainer::<f64>::new(&ds, cfg.clone()).unwrap();
    for _ in 0..3 {
        tr.step_epoch().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    Checkpoint::capture(tr.config(), tr.state()).save(&path).unwrap();
    drop(tr);

    let ck = Checkpoint::load(&path).unwrap();
    assert_eq!(ck.epoch, 3);
    let resumed = Trainer::<f64>::new(&ds, ck.config.clone()).unwrap().with_state(ck.restore().unwrap()).unwrap();
    let out = resumed.run().unwrap();
    assert_eq!(serde_json::to_string(&out.report).unwrap(), serde_json::to_string(&straight.report).unwrap());
    assert_eq!(out.imputed, straight.imputed);
}

#[test]
fn single_precision_run() {
    let ds = small_dataset(0.3);
    let out = run_cuts::<f32>(&ds, small_config(2)).unwrap();
    assert!(out.report.auroc_summary.is_some());
    assert!(out.imputed.iter().all(|v| v.is_finite()));
}

#[test]
fn exploding_learning_rate_aborts_with_epoch() {
    let ds = small_dataset(0.0);
    let cfg = RunConfig { lr_data: 1e200, ..small_config(1) };
    match run_cuts::<f64>(&ds, cfg) {
        Err(CutsError::Diverged { epoch, .. }) => assert!(epoch < 7),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn unusable_inputs_are_rejected() {
    let mut ds = small_dataset(0.0);
    let mut mask = ds.mask.clone();
    mask.column_mut(2).fill(false);
    ds.set_mask(mask).unwrap();
    assert!(matches!(Trainer::<f64>::new(&ds, small_config(0)), Err(CutsError::Config(_))));

    let mut ds = small_dataset(0.0);
    ds.x_observed[[5, 1]] = f64::NAN;
    ds.x_latent[[5, 1]] = f64::NAN;
    assert!(Trainer::<f64>::new(&ds, small_config(0)).is_err());
    assert!(Trainer::<f64>::new(&small_dataset(0.0), RunConfig { input_step: 200, ..small_config(0) }).is_err());
}
