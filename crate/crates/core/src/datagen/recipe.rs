//! Declarative description of a benchmark dataset, used by sweeps and the
//! command line.

use serde::{Deserialize, Serialize};

use super::{apply_periodic_missing, apply_random_missing, gen_lorenz96, gen_var_with, TimeSeriesDataset, VarStructure};
use crate::error::{CutsError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarParams {
    pub n: usize,
    pub length: usize,
    pub tau_max: usize,
    pub sparsity: f64,
    pub noise_sigma: f64,
    pub structure: VarStructure,
}

impl Default for VarParams {
    fn default() -> Self {
        VarParams { n: 10, length: 10_000, tau_max: 3, sparsity: 0.3, noise_sigma: 0.1, structure: VarStructure::SharedLags }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorenzParams {
    pub n: usize,
    pub length: usize,
    pub forcing: f64,
    pub dt: f64,
    pub subsample: usize,
    pub noise_sigma: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams { n: 10, length: 1000, forcing: 10.0, dt: 0.01, subsample: 10, noise_sigma: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Var(VarParams),
    Lorenz96(LorenzParams),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::Var(VarParams::default())
    }
}

impl GeneratorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorConfig::Var(_) => "var",
            GeneratorConfig::Lorenz96(_) => "lorenz96",
        }
    }

    pub fn generate(&self, seed: u64) -> Result<TimeSeriesDataset> {
        match self {
            GeneratorConfig::Var(p) => gen_var_with(p.structure, p.n, p.length, p.tau_max, p.sparsity, p.noise_sigma, seed),
            GeneratorConfig::Lorenz96(p) => gen_lorenz96(p.n, p.length, p.forcing, p.dt, p.subsample, p.noise_sigma, seed),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case", deny_unknown_fields)]
pub enum MissingConfig {
    #[default]
    None,
    Random {
        p: f64,
    },
    Periodic {
        t_max: usize,
    },
}

impl MissingConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MissingConfig::None => "none",
            MissingConfig::Random { .. } => "random",
            MissingConfig::Periodic { .. } => "periodic",
        }
    }

    /// Severity as a number: `p` for random, `t_max` for periodic.
    pub fn level(&self) -> f64 {
        match self {
            MissingConfig::None => 0.0,
            MissingConfig::Random { p } => *p,
            MissingConfig::Periodic { t_max } => *t_max as f64,
        }
    }

    /// Same mechanism at another severity.
    pub fn with_level(&self, level: f64) -> Result<Self> {
        match self {
            MissingConfig::None if level == 0.0 => Ok(MissingConfig::None),
            MissingConfig::None => Err(CutsError::Config("no missing mechanism to apply a level to".into())),
            MissingConfig::Random { .. } => Ok(MissingConfig::Random { p: level }),
            MissingConfig::Periodic { .. } => {
                if level < 1.0 || level.fract() != 0.0 {
                    return Err(CutsError::Config(format!("periodic t_max must be a positive integer, got {level}")));
                }
                Ok(MissingConfig::Periodic { t_max: level as usize })
            }
        }
    }

    pub fn apply(&self, ds: TimeSeriesDataset, seed: u64) -> Result<TimeSeriesDataset> {
        match self {
            MissingConfig::None => Ok(ds),
            MissingConfig::Random { p } => apply_random_missing(ds, *p, seed),
            MissingConfig::Periodic { t_max } => apply_periodic_missing(ds, *t_max, seed),
        }
    }
}

/// Generator plus missingness; `generate(seed)` is deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecipe {
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub missing: MissingConfig,
}

impl DatasetRecipe {
    pub fn generate(&self, seed: u64) -> Result<TimeSeriesDataset> {
        let ds = self.generator.generate(seed)?;
        self.missing.apply(ds, seed)
    }
}
