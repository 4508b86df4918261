mod common;

use common::*;
use cuts::datagen::{apply_periodic_missing, apply_random_missing, gen_lorenz96, gen_var, VarSystem};
use cuts::eval::{auroc, auroc_scores};
use cuts::model::{aggregate_graph, record_gumbel_mask, CausalProbabilityGraph};
use cuts::numgrad::{logistic, Tape};
use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn mlp_gradients_match_finite_differences() {
    check_mlp_gradients(100).unwrap();
}

#[test]
fn auroc_matches_brute_force() {
    check_auroc_oracle(1000).unwrap();
}

#[test]
fn lorenz_equilibrium_is_stationary() {
    check_lorenz_equilibrium().unwrap();
}

#[test]
fn rk4_is_fourth_order() {
    check_rk4_order().unwrap();
}

#[test]
fn observed_and_warm_up_entries_are_immutable() {
    check_immutability().unwrap();
}

#[test]
fn sigmoid_walks_cross_plus_minus_five() {
    check_sigmoid_walks().unwrap();
}

#[test]
fn hard_masked_inputs_are_ignored() {
    check_masked_inputs(200).unwrap();
}

#[test]
fn zoh_and_periodic_masks() {
    check_zoh_and_periodic().unwrap();
}

#[test]
fn same_seed_reports_are_byte_identical() {
    check_determinism().unwrap();
}

#[test]
fn var_least_squares_recovers_coefficients() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let (n, tau) = (3, 2);
        let system = VarSystem::random(n, tau, 1.0, 0.0, &mut r).unwrap();
        let history = random_matrix(tau, n, &mut r);
        let x = system.simulate_from(&history, 40, &mut r).unwrap();
        let full = ndarray::concatenate![ndarray::Axis(0), history, x];
        // regress x_t on [x_{t-1}, x_{t-2}]
        let rows: Vec<usize> = (tau..full.nrows()).collect();
        let design = Array2::from_shape_fn((rows.len(), tau * n), |(r, c)| full[[rows[r] - 1 - c / n, c % n]]);
        for j in 0..n {
            let y: Vec<f64> = rows.iter().map(|&t| full[[t, j]]).collect();
            let coef = least_squares(&design, &y);
            for lag in 0..tau {
                for i in 0..n {
                    let got = coef[lag * n + i];
                    let want = system.coeffs[[lag, i, j]];
                    assert!((got - want).abs() < 1e-6, "seed {seed} lag {lag} {i}->{j}: {got} vs {want}");
                }
            }
        }
    }
}

/// Householder QR least squares; small dense oracle.
fn least_squares(a: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (m, n) = a.dim();
    let mut r = a.clone();
    let mut b = y.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| r[[i, k]] * r[[i, k]]).sum::<f64>().sqrt();
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[[i, k]]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for c in k..n {
            let d: f64 = (k..m).map(|i| v[i - k] * r[[i, c]]).sum::<f64>() * 2.0 / vv;
            for i in k..m {
                r[[i, c]] -= d * v[i - k];
            }
        }
        let d: f64 = (k..m).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vv;
        for i in k..m {
            b[i] -= d * v[i - k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| r[[k, c]] * x[c]).sum();
        x[k] = (b[k] - s) / r[[k, k]];
    }
    x
}

#[test]
fn random_missing_count_within_three_sigma() {
    let ds = gen_var(10, 2000, 3, 0.3, 0.1, 1).unwrap();
    for p in [0.1, 0.3, 0.6] {
        let masked = apply_random_missing(ds.clone(), p, 9).unwrap();
        let total = masked.mask.len() as f64;
        let missing = masked.mask.iter().filter(|&&o| !o).count() as f64;
        let sd = (total * p * (1.0 - p)).sqrt();
        assert!((missing - total * p).abs() < 3.0 * sd, "p={p}: {missing} of {total}");
    }
}

#[test]
fn missing_mechanisms_leave_latent_and_truth_alone() {
    let ds = gen_lorenz96(6, 200, 10.0, 0.01, 10, 0.1, 3).unwrap();
    for masked in [apply_random_missing(ds.clone(), 0.5, 1).unwrap(), apply_periodic_missing(ds.clone(), 4, 1).unwrap()] {
        assert_eq!(masked.x_latent, ds.x_latent);
        assert_eq!(masked.truth_summary, ds.truth_summary);
        assert_eq!(masked.truth_lagged, ds.truth_lagged);
    }
}

#[test]
fn bernoulli_and_gumbel_masks_match_probabilities() {
    use cuts::model::{gumbel_softmax_mask, sample_bernoulli_mask};
    let theta = Array3::from_shape_fn((1, 3, 3), |(_, _, j)| [-1.0, 0.0, 2.0][j]);
    let cpg = CausalProbabilityGraph::from_logits(theta).unwrap();
    let mut r = rng(5);
    let draws = 20_000;
    for j in 0..3 {
        let m = cpg.probabilities()[[0, 0, j]];
        let sd = (m * (1.0 - m) / draws as f64).sqrt();
        let hard: f64 = (0..draws).map(|_| sample_bernoulli_mask(&cpg, j, &mut r).unwrap().values[[0, 0]]).sum();
        assert!((hard / draws as f64 - m).abs() < 4.0 * sd, "bernoulli target {j}");
        // at low temperature the relaxed draw is nearly binary with the same mean
        let soft: f64 = (0..draws)
            .map(|_| (gumbel_softmax_mask(&cpg, j, 0.05, &mut r).unwrap().values[[0, 0]] > 0.5) as u8 as f64)
            .sum();
        assert!((soft / draws as f64 - m).abs() < 4.0 * sd, "gumbel target {j}");
    }
}

/// `sum_k c_k * relaxed_mask_k` differentiated through the tape.
fn gumbel_objective(theta: &Array2<f64>, noise: &Array2<f64>, weights: &Array2<f64>, t: f64) -> (f64, Array2<f64>) {
    let mut tape = Tape::new();
    let logits = tape.parameter(theta.clone());
    let g = tape.constant(noise.clone());
    let mask = record_gumbel_mask(&mut tape, logits, g, t);
    let w = tape.constant(weights.clone());
    let weighted = tape.mul(mask, w);
    tape.sum(weighted);
    let v = tape.forward(&[]).unwrap();
    tape.backward().unwrap();
    (v, tape.grad(logits).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auroc_invariant_under_monotone_transform(seed in 0u64..10_000) {
        let (s, l) = auroc_instance(seed);
        let base = auroc_scores(&s, &l).unwrap();
        let squashed: Vec<f64> = s.iter().map(|&v| (3.0 * v - 1.0).exp()).collect();
        prop_assert_eq!(base, auroc_scores(&squashed, &l).unwrap());
        prop_assert_eq!(base, auroc_brute_force(&s, &l));
    }

    #[test]
    fn auroc_of_negated_scores_complements(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let len = r.random_range(2..30);
        let mut labels: Vec<bool> = (0..len).map(|_| r.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        // continuous scores: no ties
        let s: Vec<f64> = (0..len).map(|_| r.random::<f64>()).collect();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = auroc_scores(&s, &labels).unwrap() + auroc_scores(&neg, &labels).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_auroc_of_truth_is_one(n in 2usize..6, seed in 0u64..1000) {
        let mut r = rng(seed);
        let mut truth = Array2::from_shape_simple_fn((n, n), || r.random::<bool>());
        truth[[0, 0]] = true;
        truth[[0, 1]] = false;
        let scores = truth.mapv(|t| if t { 0.9 } else { 0.1 });
        prop_assert_eq!(auroc(&scores, &truth, true).unwrap(), 1.0);
    }

    #[test]
    fn gumbel_mask_gradient_matches_finite_differences(seed in 0u64..10_000, t in 0.2f64..2.0) {
        let mut r = rng(seed);
        let k = r.random_range(1..8);
        let theta = Array2::from_shape_simple_fn((1, k), || r.random_range(-3.0..3.0));
        let noise = Array2::from_shape_simple_fn((1, k), || r.random_range(-2.0..2.0));
        let weights = Array2::from_shape_simple_fn((1, k), || r.random_range(-1.0..1.0));
        let (_, grad) = gumbel_objective(&theta, &noise, &weights, t);
        // closed form: d/dtheta w * logistic((theta + g) / t) = w * m (1 - m) / t
        let exact: Vec<f64> = (0..k)
            .map(|c| {
                let m = logistic((theta[[0, c]] + noise[[0, c]]) / t);
                weights[[0, c]] * m * (1.0 - m) / t
            })
            .collect();
        for (a, b) in grad.iter().zip(&exact) {
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300), "{} vs closed form {}", a, b);
        }
        // central differences cannot resolve a fully saturated relaxation in double precision
        prop_assume!(exact.iter().any(|g| g.abs() >= 1e-6));
        let h = 1e-6;
        let mut numeric = Vec::new();
        for c in 0..k {
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[[0, c]] += h;
            down[[0, c]] -= h;
            numeric.push((gumbel_objective(&up, &noise, &weights, t).0 - gumbel_objective(&down, &noise, &weights, t).0) / (2.0 * h));
        }
        let e = max_rel_err(grad.as_slice().unwrap(), &numeric);
        prop_assert!(e < 1e-4, "relative error {}", e);
    }

    #[test]
    fn adjoints_are_linear(seed in 0u64..10_000) {
        // d(f + g) = df + dg for f = sum(logistic(p)), g = sum((p - c)^2)
        let mut r = rng(seed);
        let p = random_matrix(2, 3, &mut r);
        let c = random_matrix(2, 3, &mut r);
        let grad_of = |which: u8| {
            let mut tape = Tape::new();
            let pv = tape.parameter(p.clone());
            let f = tape.logistic(pv);
            let f = tape.sum(f);
            let cv = tape.constant(c.clone());
            let g = tape.squared_error(pv, cv);
            let g = tape.sum(g);
            match which {
                0 => { tape.scale(f, 1.0); }
                1 => { tape.scale(g, 1.0); }
                _ => { tape.add(f, g); }
            }
            tape.forward(&[]).unwrap();
            tape.backward().unwrap();
            tape.grad(pv).unwrap()
        };
        let sum = grad_of(0) + grad_of(1);
        let joint = grad_of(2);
        for (a, b) in sum.iter().zip(&joint) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_is_monotone(seed in 0u64..10_000, bump in 0.0f64..0.5) {
        let mut r = rng(seed);
        let (tau, n) = (r.random_range(1..4), r.random_range(1..5));
        let probs = Array3::from_shape_simple_fn((tau, n, n), || r.random::<f64>());
        let (a, i, j) = (r.random_range(0..tau), r.random_range(0..n), r.random_range(0..n));
        let mut raised = probs.clone();
        raised[[a, i, j]] = (raised[[a, i, j]] + bump).min(1.0);
        let before = aggregate_graph(&probs);
        let after = aggregate_graph(&raised);
        for (x, y) in before.iter().zip(&after) {
            prop_assert!(y >= x);
        }
    }

    #[test]
    fn edge_effect_is_nonnegative(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let net = cuts::numgrad::Mlp::<f64>::new(6, 8, 3, 0.05, &mut r).unwrap();
        let windows = random_matrix(5, 6, &mut r);
        let slot = r.random_range(0..6);
        let stat = cuts::model::edge_effect_statistic(&net, &windows, slot).unwrap();
        prop_assert!(stat >= 0.0 && stat.is_finite());
    }

    #[test]
    fn logistic_is_symmetric(v in -40.0f64..40.0) {
        prop_assert!((logistic(v) + logistic(-v) - 1.0).abs() < 1e-15);
    }
}

