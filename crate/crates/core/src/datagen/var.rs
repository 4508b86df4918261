use ndarray::{s, Array2, Array3};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{param, DatasetMeta, TimeSeriesDataset};
use crate::error::{CutsError, Result};
use crate::rng;

const MAX_RESCALES: usize = 16;
const TARGET_RADIUS: f64 = 0.95;
const COEFF_RANGE: (f64, f64) = (0.2, 0.8);

/// How the random coefficient tensor is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarStructure {
    /// Every lagged entry independently nonzero with signed magnitude,
    /// see [`VarSystem::random`].
    #[default]
    PerLag,
    /// A fixed parent set per target shared by all lags, positive weights,
    /// see [`VarSystem::random_shared_lags`].
    SharedLags,
}

impl VarStructure {
    pub fn name(self) -> &'static str {
        match self {
            VarStructure::PerLag => "per_lag",
            VarStructure::SharedLags => "shared_lags",
        }
    }
}

/// Sparse vector autoregression
/// `x_t[j] = sum_tau sum_i coeffs[[tau-1, i, j]] * x_{t-tau}[i] + e_t[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarSystem {
    pub coeffs: Array3<f64>,
    pub noise_sigma: f64,
}

impl VarSystem {
    pub fn new(coeffs: Array3<f64>, noise_sigma: f64) -> Result<Self> {
        let (tau, n, m) = coeffs.dim();
        if tau == 0 || n == 0 || n != m {
            return Err(CutsError::Shape(format!("coefficients must be tau×N×N, got {:?}", coeffs.dim())));
        }
        if !(noise_sigma >= 0.0) {
            return Err(CutsError::Config(format!("noise_sigma must be non-negative, got {noise_sigma}")));
        }
        Ok(VarSystem { coeffs, noise_sigma })
    }

    /// Draws a random system: each lagged entry is nonzero with probability
    /// `sparsity`, magnitudes uniform on [0.2, 0.8] with random sign, then the
    /// whole tensor is rescaled until the companion spectral radius is below 1.
    pub fn random<R: Rng + ?Sized>(n: usize, tau_max: usize, sparsity: f64, noise_sigma: f64, rng: &mut R) -> Result<Self> {
        if !(sparsity > 0.0 && sparsity <= 1.0) {
            return Err(CutsError::Config(format!("sparsity must lie in (0, 1], got {sparsity}")));
        }
        let mut coeffs = Array3::zeros((tau_max, n, n));
        for c in coeffs.iter_mut() {
            if rng.random::<f64>() < sparsity {
                let mag = rng.random_range(COEFF_RANGE.0..=COEFF_RANGE.1);
                *c = if rng.random::<bool>() { mag } else { -mag };
            }
        }
        for _ in 0..MAX_RESCALES {
            let rho = companion_spectral_radius(&coeffs);
            if rho < 1.0 {
                return VarSystem::new(coeffs, noise_sigma);
            }
            coeffs.mapv_inplace(|c| c * TARGET_RADIUS / rho);
        }
        Err(CutsError::Generation(format!(
            "could not stabilize VAR coefficients after {MAX_RESCALES} rescalings"
        )))
    }

    /// Draws a system in which every series drives itself plus
    /// `round(sparsity * n) - 1` other series chosen per target, with one
    /// positive coefficient shared by every lag of every edge, chosen so the
    /// companion spectral radius is 0.95.
    pub fn random_shared_lags<R: Rng + ?Sized>(n: usize, tau_max: usize, sparsity: f64, noise_sigma: f64, rng: &mut R) -> Result<Self> {
        if !(sparsity > 0.0 && sparsity <= 1.0) {
            return Err(CutsError::Config(format!("sparsity must lie in (0, 1], got {sparsity}")));
        }
        let others = ((sparsity * n as f64).round() as usize).clamp(1, n) - 1;
        let mut coeffs = Array3::zeros((tau_max, n, n));
        for j in 0..n {
            let mut pool: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            pool.shuffle(rng);
            for &i in std::iter::once(&j).chain(&pool[..others]) {
                for lag in 0..tau_max {
                    coeffs[[lag, i, j]] = 1.0;
                }
            }
        }
        // radius is increasing in the shared coefficient for a nonnegative system
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if companion_spectral_radius(&coeffs.mapv(|c| c * mid)) < TARGET_RADIUS {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        VarSystem::new(coeffs.mapv(|c| c * lo), noise_sigma)
    }

    pub fn n_series(&self) -> usize {
        self.coeffs.dim().1
    }

    pub fn tau_max(&self) -> usize {
        self.coeffs.dim().0
    }

    pub fn truth_lagged(&self) -> Array3<bool> {
        self.coeffs.mapv(|c| c.abs() > 0.0)
    }

    /// Continues the recursion from `history` (oldest row first, at least
    /// `tau_max` rows) for `steps` new rows.
    pub fn simulate_from<R: Rng + ?Sized>(&self, history: &Array2<f64>, steps: usize, rng: &mut R) -> Result<Array2<f64>> {
        let (tau, n) = (self.tau_max(), self.n_series());
        if history.ncols() != n || history.nrows() < tau {
            return Err(CutsError::Shape(format!(
                "history {:?} cannot seed a {}-lag system on {} series",
                history.dim(),
                tau,
                n
            )));
        }
        let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| CutsError::Config(e.to_string()))?;
        let h = history.nrows();
        let mut x = Array2::zeros((h + steps, n));
        x.slice_mut(s![..h, ..]).assign(history);
        for t in h..h + steps {
            for j in 0..n {
                let mut acc = 0.0;
                for lag in 1..=tau {
                    let past = x.row(t - lag);
                    let col = self.coeffs.slice(s![lag - 1, .., j]);
                    acc += past.dot(&col);
                }
                x[[t, j]] = acc + if self.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            }
        }
        Ok(x.slice(s![h.., ..]).to_owned())
    }
}

/// Generates a VAR benchmark dataset with per-lag random coefficients; the
/// first `10 * tau_max` samples are discarded as burn-in.
pub fn gen_var(n: usize, length: usize, tau_max: usize, sparsity: f64, noise_sigma: f64, seed: u64) -> Result<TimeSeriesDataset> {
    gen_var_with(VarStructure::PerLag, n, length, tau_max, sparsity, noise_sigma, seed)
}

/// [`gen_var`] with a choice of coefficient structure.
pub fn gen_var_with(
    structure: VarStructure,
    n: usize,
    length: usize,
    tau_max: usize,
    sparsity: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if n < 2 {
        return Err(CutsError::Config(format!("VAR needs at least 2 series, got {n}")));
    }
    if tau_max == 0 || length <= tau_max {
        return Err(CutsError::Config(format!("length {length} must exceed tau_max {tau_max} >= 1")));
    }
    let mut coeff_rng = rng::stream(seed, &[0x0076_6172, 0]);
    let system = match structure {
        VarStructure::PerLag => VarSystem::random(n, tau_max, sparsity, noise_sigma, &mut coeff_rng)?,
        VarStructure::SharedLags => VarSystem::random_shared_lags(n, tau_max, sparsity, noise_sigma, &mut coeff_rng)?,
    };
    let mut sim_rng = rng::stream(seed, &[0x0076_6172, 1]);
    let burn_in = 10 * tau_max;
    let start = Array2::zeros((tau_max, n));
    let x = system.simulate_from(&start, burn_in + length, &mut sim_rng)?;
    let x = x.slice(s![burn_in.., ..]).to_owned();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CutsError::Generation("VAR simulation produced non-finite values".into()));
    }

    let mut meta = DatasetMeta { generator: "var".into(), seed, ..Default::default() };
    meta.params.insert("n".into(), param(n));
    meta.params.insert("length".into(), param(length));
    meta.params.insert("tau_max".into(), param(tau_max));
    meta.params.insert("sparsity".into(), param(sparsity));
    meta.params.insert("noise_sigma".into(), param(noise_sigma));
    meta.params.insert("structure".into(), param(structure.name()));
    meta.params.insert("burn_in".into(), param(burn_in));
    meta.params.insert("spectral_radius".into(), param(companion_spectral_radius(&system.coeffs)));
    Ok(TimeSeriesDataset::fully_observed(x, meta).with_lagged_truth(system.truth_lagged()))
}

/// Spectral radius of the `(tau·N)×(tau·N)` companion matrix of the
/// recursion in [`VarSystem`].
pub fn companion_spectral_radius(coeffs: &Array3<f64>) -> f64 {
    let (tau, n, _) = coeffs.dim();
    let d = tau * n;
    // state (x_t, x_{t-1}, ...): block row 0 holds A_tau^T, then shifted identities
    let mut c = Array2::zeros((d, d));
    for lag in 0..tau {
        for i in 0..n {
            for j in 0..n {
                c[[j, lag * n + i]] = coeffs[[lag, i, j]];
            }
        }
    }
    for k in n..d {
        c[[k, k - n]] = 1.0;
    }
    spectral_radius(&c)
}

/// Spectral radius by Gelfand's formula on repeated squaring,
/// `rho = lim ||A^k||^(1/k)`, normalizing each square to stay in range.
/// The estimate approaches rho from above.
pub fn spectral_radius(a: &Array2<f64>) -> f64 {
    assert_eq!(a.nrows(), a.ncols(), "spectral radius of a non-square matrix");
    let fro = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut p = a.clone();
    let mut log_norm = 0.0; // log ||A^k|| accumulated through the normalizations
    let mut k = 1.0f64;
    for _ in 0..40 {
        let nrm = fro(&p);
        if nrm == 0.0 {
            return 0.0;
        }
        p.mapv_inplace(|v| v / nrm);
        // ||A^k|| = nrm * exp(log_norm); squaring doubles the log scale
        log_norm = 2.0 * (log_norm + nrm.ln());
        p = p.dot(&p);
        k *= 2.0;
    }
    let nrm = fro(&p);
    if nrm == 0.0 {
        return 0.0;
    }
    ((log_norm + nrm.ln()) / k).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectral_radius_of_known_matrices() {
        assert!((spectral_radius(&array![[0.5, 0.0], [0.0, -0.8]]) - 0.8).abs() < 1e-6);
        // rotation by 90 degrees scaled by 0.9: complex pair of modulus 0.9
        assert!((spectral_radius(&array![[0.0, -0.9], [0.9, 0.0]]) - 0.9).abs() < 1e-6);
        // defective Jordan block: radius 0.7
        assert!((spectral_radius(&array![[0.7, 1.0], [0.0, 0.7]]) - 0.7).abs() < 1e-6);
        assert_eq!(spectral_radius(&Array2::zeros((3, 3))), 0.0);
    }

    #[test]
    fn scalar_ar2_companion_radius() {
        // x_t = 0.5 x_{t-1} + 0.3 x_{t-2}: roots of z^2 - 0.5 z - 0.3
        let coeffs = Array3::from_shape_vec((2, 1, 1), vec![0.5, 0.3]).unwrap();
        let root = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        assert!((companion_spectral_radius(&coeffs) - root).abs() < 1e-6);
    }

    #[test]
    fn zero_coefficients_give_pure_noise() {
        let system = VarSystem::new(Array3::zeros((2, 3, 3)), 0.5).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let x = system.simulate_from(&Array2::from_elem((2, 3), 9.0), 50, &mut a).unwrap();
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.5).unwrap();
        for v in x.iter() {
            assert_eq!(*v, noise.sample(&mut b));
        }
        assert!(system.truth_lagged().iter().all(|&t| !t));
    }

    #[test]
    fn univariate_recursion_halves() {
        let system = VarSystem::new(Array3::from_elem((1, 1, 1), 0.5), 0.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let x = system.simulate_from(&array![[1.0]], 2, &mut r).unwrap();
        assert_eq!(x, array![[0.5], [0.25]]);
    }

    #[test]
    fn generated_system_is_stable_and_truth_consistent() {
        let ds = gen_var(10, 500, 3, 0.3, 0.1, 11).unwrap();
        assert_eq!(ds.x_latent.dim(), (500, 10));
        assert!(ds.meta.params["spectral_radius"].as_f64().unwrap() < 1.0);
        assert_eq!(ds.meta.tau_max(), Some(3));
        ds.validate().unwrap();
        let lagged = ds.truth_lagged.as_ref().unwrap();
        assert_eq!(lagged.dim(), (3, 10, 10));
        assert!(lagged.iter().any(|&t| t));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gen_var(1, 100, 3, 0.3, 0.1, 0).is_err());
        assert!(gen_var(4, 3, 3, 0.3, 0.1, 0).is_err());
        assert!(gen_var(4, 100, 3, 0.0, 0.1, 0).is_err());
    }

    #[test]
    fn shared_lag_structure() {
        let ds = gen_var_with(VarStructure::SharedLags, 10, 300, 3, 0.3, 0.1, 2).unwrap();
        let lagged = ds.truth_lagged.as_ref().unwrap();
        let summary = ds.truth_summary.as_ref().unwrap();
        for j in 0..10 {
            assert!(summary[[j, j]]);
            assert_eq!((0..10).filter(|&i| summary[[i, j]]).count(), 3);
            for i in 0..10 {
                assert!((0..3).all(|k| lagged[[k, i, j]] == summary[[i, j]]));
            }
        }
        let rho = ds.meta.params["spectral_radius"].as_f64().unwrap();
        assert!((rho - 0.95).abs() < 1e-3, "{rho}");
        assert_eq!(ds.meta.params["structure"], "shared_lags");
    }
}
