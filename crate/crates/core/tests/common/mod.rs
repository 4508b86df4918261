//! Checks shared by the property tests and the acceptance suite. Each check
//! returns `Err` with a description of the first violation.

#![allow(dead_code)]

use cuts::datagen::{
    apply_random_missing, gen_var, lorenz96_derivative, periodic_mask, rk4_step, zoh_fill, DatasetMeta,
    TimeSeriesDataset,
};
use cuts::eval::auroc_scores;
use cuts::model::{dsgnn_predict, EdgeSampleMask};
use cuts::numgrad::{logistic, Mlp, Tape};
use cuts::train::{Phase, RunConfig, Trainer};
use cuts::run_cuts;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Check = std::result::Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
}

/// Pairwise count over every (positive, negative) pair.
pub fn auroc_brute_force(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (a, &la) in scores.iter().zip(labels) {
        for (b, &lb) in scores.iter().zip(labels) {
            if la && !lb {
                pairs += 1.0;
                if a > b {
                    num += 1.0;
                } else if a == b {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// Loss `sum (mlp(x) - y)^2` and its parameter gradients from the tape.
pub fn mlp_loss_and_grads(net: &Mlp<f64>, x: &Array2<f64>, y: &Array2<f64>) -> (f64, Vec<Array2<f64>>) {
    let mut tape = Tape::new();
    let xin = tape.input(x.nrows(), x.ncols(), false);
    let (out, leaves) = net.record(&mut tape, xin, true);
    let target = tape.constant(y.clone());
    let err = tape.squared_error(out, target);
    tape.sum(err);
    let loss = tape.forward(&[(xin, x.clone())]).unwrap();
    tape.backward().unwrap();
    (loss, leaves.iter().map(|&l| tape.grad(l).unwrap()).collect())
}

fn mlp_loss(net: &Mlp<f64>, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let pred = net.forward(x).unwrap();
    (&pred - y).mapv(|d| d * d).sum()
}

/// Norm-wise relative error `max|a - b| / max(max|a|, max|b|)`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = inf(analytic).max(inf(numeric));
    if scale == 0.0 {
        0.0
    } else {
        inf(&diff) / scale
    }
}

/// Central differences on every parameter of a random MLP.
pub fn mlp_gradient_instance(seed: u64) -> f64 {
    let mut r = rng(seed);
    let inputs = r.random_range(1..6);
    let hidden = r.random_range(2..8);
    let layers = r.random_range(1..4);
    let mut net = Mlp::<f64>::new(inputs, hidden, layers, 0.05, &mut r).unwrap();
    let x = random_matrix(4, inputs, &mut r);
    let y = random_matrix(4, 1, &mut r);
    let (_, grads) = mlp_loss_and_grads(&net, &x, &y);
    let h = 1e-6;
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for p in 0..grads.len() {
        for k in 0..grads[p].len() {
            let idx = grads[p].indexed_iter().nth(k).unwrap().0;
            let orig = net.params()[p][idx];
            net.params_mut()[p][idx] = orig + h;
            let up = mlp_loss(&net, &x, &y);
            net.params_mut()[p][idx] = orig - h;
            let down = mlp_loss(&net, &x, &y);
            net.params_mut()[p][idx] = orig;
            analytic.push(grads[p][idx]);
            numeric.push((up - down) / (2.0 * h));
        }
    }
    max_rel_err(&analytic, &numeric)
}

pub fn check_mlp_gradients(instances: u64) -> Check {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let e = mlp_gradient_instance(seed);
        if !(e < 1e-4) {
            return Err(format!("instance {seed}: relative error {e:.3e}"));
        }
        worst = worst.max(e);
    }
    Ok(format!("{instances} MLPs, worst relative error {worst:.2e}"))
}

/// Random scores drawn from a small grid so ties occur.
pub fn auroc_instance(seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let len = r.random_range(2..20);
    let mut labels: Vec<bool> = (0..len).map(|_| r.random::<bool>()).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = (0..len).map(|_| r.random_range(0..6) as f64 / 5.0).collect();
    (scores, labels)
}

pub fn check_auroc_oracle(instances: u64) -> Check {
    for seed in 0..instances {
        let (s, l) = auroc_instance(seed);
        let fast = auroc_scores(&s, &l).unwrap();
        let slow = auroc_brute_force(&s, &l);
        if fast != slow {
            return Err(format!("instance {seed}: {fast} vs brute force {slow}"));
        }
    }
    Ok(format!("{instances} instances exact"))
}

pub fn check_lorenz_equilibrium() -> Check {
    for (n, f) in [(5, 8.0), (10, 10.0), (12, 40.0)] {
        let d = lorenz96_derivative(&Array1::from_elem(n, f), f);
        if d.iter().any(|&v| v != 0.0) {
            return Err(format!("N={n} F={f}: derivative {d}"));
        }
    }
    Ok("derivative exactly zero at x = F".into())
}

pub fn integrate(x0: &Array1<f64>, forcing: f64, dt: f64, horizon: f64) -> Array1<f64> {
    let steps = (horizon / dt).round() as usize;
    (0..steps).fold(x0.clone(), |x, _| rk4_step(&x, forcing, dt))
}

/// Observed order from errors against a much finer reference at
/// `dt, dt/2, dt/4` (dt = 0.02) over a unit horizon.
pub fn rk4_observed_orders(forcing: f64) -> Vec<f64> {
    let mut x0 = Array1::from_elem(10, forcing);
    x0[0] += 0.5;
    x0[3] -= 0.2;
    let reference = integrate(&x0, forcing, 0.02 / 128.0, 1.0);
    let err = |dt: f64| {
        let d = integrate(&x0, forcing, dt, 1.0) - &reference;
        d.mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b))
    };
    let errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| err(dt)).collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn check_rk4_order() -> Check {
    let orders = rk4_observed_orders(10.0);
    if orders.iter().all(|&o| (3.5..=4.5).contains(&o)) {
        Ok(format!("observed orders {orders:.3?}"))
    } else {
        Err(format!("observed orders {orders:?}"))
    }
}

pub fn toy_config(seed: u64) -> RunConfig {
    RunConfig { n1: 2, n2: 3, n3: 2, batch_size: 32, hidden_features: 16, lr_data: 1e-3, seed, ..RunConfig::var() }
}

pub fn toy_dataset(p: f64) -> TimeSeriesDataset {
    apply_random_missing(gen_var(4, 120, 3, 0.4, 0.1, 11).unwrap(), p, 12).unwrap()
}

/// Observed entries never move; nothing moves during warm-up.
pub fn check_immutability() -> Check {
    let ds = toy_dataset(0.4);
    let mut tr = Trainer::<f64>::new(&ds, toy_config(3)).map_err(|e| e.to_string())?;
    let init = tr.initial_fill().clone();
    let mut epochs = 0;
    while !tr.is_finished() {
        let warm = tr.phase(tr.state().epoch) == Phase::WarmUp;
        tr.step_epoch().map_err(|e| e.to_string())?;
        epochs += 1;
        let x = &tr.state().x_work;
        if warm && *x != init {
            return Err(format!("x_work changed during warm-up epoch {epochs}"));
        }
        for (((t, i), &o), (&a, &b)) in ds.mask.indexed_iter().zip(x.iter().zip(init.iter())) {
            if o && a.to_bits() != b.to_bits() {
                return Err(format!("observed entry ({t}, {i}) changed at epoch {epochs}"));
            }
        }
    }
    let imputed = tr.imputed();
    for ((&o, &a), &b) in ds.mask.iter().zip(&imputed).zip(&ds.x_observed) {
        if o && a.to_bits() != b.to_bits() {
            return Err("imputed output does not restore observed values".into());
        }
    }
    Ok(format!("{epochs} epochs"))
}

/// Steps of `theta += rate * sigmoid'(theta)` from 0 until `|theta| > 5`.
pub fn sigmoid_walk_steps(rate: f64, limit: u64) -> Option<u64> {
    let mut theta: f64 = 0.0;
    for k in 1..=limit {
        let m = logistic(theta);
        theta += rate * m * (1.0 - m);
        if theta.abs() > 5.0 {
            return Some(k);
        }
    }
    None
}

pub fn check_sigmoid_walks() -> Check {
    match (sigmoid_walk_steps(0.01, 10_000_000), sigmoid_walk_steps(-0.01, 10_000_000)) {
        (Some(up), Some(down)) if up == down => Ok(format!("crosses +-5 after {up} steps")),
        other => Err(format!("ascent/descent steps {other:?}")),
    }
}

/// Two windows that differ only where the hard mask is zero predict the same.
pub fn masked_input_instance(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (tau, n) = (r.random_range(1..4), r.random_range(2..5));
    let net = Mlp::<f64>::new(tau * n, 8, 3, 0.05, &mut r).unwrap();
    let values = Array2::from_shape_simple_fn((tau, n), || if r.random::<bool>() { 1.0 } else { 0.0 });
    let mask = EdgeSampleMask { values };
    let a = random_matrix(tau, n, &mut r);
    let mut b = a.clone();
    for ((k, v), &s) in b.indexed_iter_mut().zip(mask.values.iter()) {
        if s == 0.0 {
            *v += 10.0 * r.random_range(-1.0..1.0) + k.0 as f64;
        }
    }
    let (pa, pb) = (dsgnn_predict(&net, &a, &mask).unwrap(), dsgnn_predict(&net, &b, &mask).unwrap());
    if pa.to_bits() == pb.to_bits() {
        Ok(())
    } else {
        Err(format!("instance {seed}: {pa} vs {pb}"))
    }
}

pub fn check_masked_inputs(instances: u64) -> Check {
    for seed in 0..instances {
        masked_input_instance(seed)?;
    }
    Ok(format!("{instances} instances bit-identical"))
}

pub fn random_mask(len: usize, n: usize, p: f64, r: &mut ChaCha8Rng) -> Array2<bool> {
    Array2::from_shape_simple_fn((len, n), || r.random::<f64>() >= p)
}

pub fn check_zoh_and_periodic() -> Check {
    for seed in 0..200 {
        let mut r = rng(seed);
        let (len, n) = (r.random_range(1..40), r.random_range(1..4));
        let x = random_matrix(len, n, &mut r);
        let mask = random_mask(len, n, r.random::<f64>(), &mut r);
        let filled = zoh_fill(&x, &mask).unwrap();
        for ((&o, &a), &b) in mask.iter().zip(&filled).zip(&x) {
            if o && a.to_bits() != b.to_bits() {
                return Err(format!("zoh altered an observed entry (seed {seed})"));
            }
        }
    }
    let periods = [1, 2, 3, 4, 7];
    let len = 420; // common multiple, so densities are exact
    let mask = periodic_mask(len, &periods);
    for (i, &p) in periods.iter().enumerate() {
        let count = mask.column(i).iter().filter(|&&o| o).count();
        if count * p != len {
            return Err(format!("period {p}: {count} observations in {len}"));
        }
    }
    Ok("200 zoh instances, 5 periods".into())
}

pub fn check_determinism() -> Check {
    let ds = toy_dataset(0.3);
    let a = run_cuts::<f64>(&ds, toy_config(7)).map_err(|e| e.to_string())?;
    let b = run_cuts::<f64>(&ds, toy_config(7)).map_err(|e| e.to_string())?;
    let (ja, jb) = (serde_json::to_vec(&a.report).unwrap(), serde_json::to_vec(&b.report).unwrap());
    if ja == jb {
        Ok(format!("{} byte report identical", ja.len()))
    } else {
        Err("reports differ".into())
    }
}

/// Three-series system with `x1` pure noise, `x2` a nonlinear autoregression,
/// and `x3` driven by the previous `x1` and `x2`. Only `x2` has missing
/// entries, each independently with probability `p2`.
pub fn three_series(length: usize, p2: f64, seed: u64) -> TimeSeriesDataset {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let burn_in = 100;
    let mut x = Array2::<f64>::zeros((length + burn_in, 3));
    for t in 1..length + burn_in {
        let (a, b) = (x[[t - 1, 0]], x[[t - 1, 1]]);
        x[[t, 0]] = r.random_range(-1.0..1.0);
        x[[t, 1]] = (2.0 * b).sin() + 0.2 * b + noise.sample(&mut r);
        x[[t, 2]] = (a * b).tanh() + a.abs() + 0.5 * b + noise.sample(&mut r);
    }
    let x = x.slice(ndarray::s![burn_in.., ..]).to_owned();
    // lag-1 edges only, padded to the default three-lag window
    let mut truth = Array3::from_elem((3, 3, 3), false);
    for (i, j) in [(1, 1), (0, 2), (1, 2)] {
        truth[[0, i, j]] = true;
    }
    let meta = DatasetMeta { generator: "three_series".into(), seed, ..Default::default() };
    let mut ds = TimeSeriesDataset::fully_observed(x, meta).with_lagged_truth(truth);
    let mut mask = Array2::from_elem((length, 3), true);
    for t in 0..length {
        mask[[t, 1]] = r.random::<f64>() >= p2;
    }
    ds.set_mask(mask).unwrap();
    ds
}

/// Smallest score among true edges minus the largest among false edges.
pub fn separation_margin(graph: &[Vec<f64>], truth: &Array2<bool>) -> f64 {
    let (mut lo_true, mut hi_false) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((i, j), &t) in truth.indexed_iter() {
        let v = graph[i][j];
        if t {
            lo_true = lo_true.min(v);
        } else {
            hi_false = hi_false.max(v);
        }
    }
    lo_true - hi_false
}
