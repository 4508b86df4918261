use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal};

use super::{param, DatasetMeta, TimeSeriesDataset};
use crate::error::{CutsError, Result};
use crate::rng;

/// Recorded samples dropped before the returned window.
const BURN_IN_SAMPLES: usize = 100;
const INITIAL_PERTURBATION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lorenz96System {
    pub forcing: f64,
    pub dt: f64,
    /// Integrator steps per recorded sample.
    pub subsample: usize,
    pub noise_sigma: f64,
}

impl Default for Lorenz96System {
    fn default() -> Self {
        Lorenz96System { forcing: 10.0, dt: 0.01, subsample: 10, noise_sigma: 0.1 }
    }
}

impl Lorenz96System {
    /// Parents of series `j`: `j-2, j-1, j, j+1` on the ring.
    pub fn truth_summary(n: usize) -> Array2<bool> {
        let mut truth = Array2::from_elem((n, n), false);
        for j in 0..n {
            for off in [n - 2, n - 1, 0, 1] {
                truth[[(j + off) % n, j]] = true;
            }
        }
        truth
    }

    /// Integrates from `x0` and records `length` states, one every
    /// `subsample` steps (the first record is taken after the first block).
    pub fn integrate(&self, x0: &Array1<f64>, length: usize) -> Result<Array2<f64>> {
        let n = x0.len();
        let mut x = x0.clone();
        let mut out = Array2::zeros((length, n));
        for t in 0..length {
            for _ in 0..self.subsample {
                x = rk4_step(&x, self.forcing, self.dt);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(CutsError::Generation(format!(
                    "Lorenz-96 state became non-finite at sample {t}; reduce dt (currently {})",
                    self.dt
                )));
            }
            out.row_mut(t).assign(&x);
        }
        Ok(out)
    }
}

/// `dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F` with cyclic indices.
pub fn lorenz96_derivative(x: &Array1<f64>, forcing: f64) -> Array1<f64> {
    let n = x.len();
    Array1::from_shape_fn(n, |i| {
        let xm2 = x[(i + n - 2) % n];
        let xm1 = x[(i + n - 1) % n];
        let xp1 = x[(i + 1) % n];
        -xm1 * (xm2 - xp1) - x[i] + forcing
    })
}

pub fn rk4_step(x: &Array1<f64>, forcing: f64, dt: f64) -> Array1<f64> {
    let k1 = lorenz96_derivative(x, forcing);
    let k2 = lorenz96_derivative(&(x + &(&k1 * (dt / 2.0))), forcing);
    let k3 = lorenz96_derivative(&(x + &(&k2 * (dt / 2.0))), forcing);
    let k4 = lorenz96_derivative(&(x + &(&k3 * dt)), forcing);
    x + &((k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (dt / 6.0))
}

/// Generates a Lorenz-96 benchmark dataset with additive observation noise.
pub fn gen_lorenz96(
    n: usize,
    length: usize,
    forcing: f64,
    dt: f64,
    subsample: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<TimeSeriesDataset> {
    if n < 4 {
        return Err(CutsError::Config(format!("Lorenz-96 needs at least 4 series, got {n}")));
    }
    if length == 0 || subsample == 0 || !(dt > 0.0) || !(noise_sigma >= 0.0) {
        return Err(CutsError::Config(format!(
            "invalid Lorenz-96 settings: length {length}, dt {dt}, subsample {subsample}, noise {noise_sigma}"
        )));
    }
    let system = Lorenz96System { forcing, dt, subsample, noise_sigma };
    let mut init_rng = rng::stream(seed, &[0x6c6f72, 0]);
    let perturb = Normal::new(0.0, INITIAL_PERTURBATION).expect("valid sigma");
    let x0 = Array1::from_shape_fn(n, |_| forcing + perturb.sample(&mut init_rng));
    let traj = system.integrate(&x0, BURN_IN_SAMPLES + length)?;
    let mut x = traj.slice(ndarray::s![BURN_IN_SAMPLES.., ..]).to_owned();
    if noise_sigma > 0.0 {
        let noise = Normal::new(0.0, noise_sigma).expect("valid sigma");
        let mut noise_rng = rng::stream(seed, &[0x6c6f72, 1]);
        x.mapv_inplace(|v| v + noise.sample(&mut noise_rng));
    }

    let mut meta = DatasetMeta { generator: "lorenz96".into(), seed, ..Default::default() };
    meta.params.insert("n".into(), param(n));
    meta.params.insert("length".into(), param(length));
    meta.params.insert("forcing".into(), param(forcing));
    meta.params.insert("dt".into(), param(dt));
    meta.params.insert("subsample".into(), param(subsample));
    meta.params.insert("noise_sigma".into(), param(noise_sigma));
    meta.params.insert("burn_in".into(), param(BURN_IN_SAMPLES));
    Ok(TimeSeriesDataset::fully_observed(x, meta).with_summary_truth(Lorenz96System::truth_summary(n)))
}
