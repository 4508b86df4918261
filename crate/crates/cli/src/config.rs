use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cuts::datagen::{DatasetRecipe, GeneratorConfig, MissingConfig};
use cuts::train::{Ablation, RunConfig};
use serde::{Deserialize, Serialize};

/// Experiment description read from a TOML file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub out_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Missingness levels swept by `sweep` (p for random, t_max for periodic).
    pub levels: Vec<f64>,
    pub ablations: Vec<Ablation>,
    pub generator: GeneratorConfig,
    pub missing: MissingConfig,
    /// Overrides on top of the generator's default run settings.
    pub run: toml::Table,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(ConfigError::from)?;
        cfg.run_config()?;
        Ok(cfg)
    }

    pub fn recipe(&self) -> DatasetRecipe {
        DatasetRecipe { generator: self.generator.clone(), missing: self.missing.clone() }
    }

    /// Defaults for the generator, overlaid with the `[run]` table.
    pub fn run_config(&self) -> anyhow::Result<RunConfig> {
        let base = match self.generator {
            GeneratorConfig::Var(_) => RunConfig::var(),
            GeneratorConfig::Lorenz96(_) => RunConfig::lorenz96(),
        };
        let mut table = toml::Table::try_from(&base).context("encoding run defaults")?;
        for (k, v) in &self.run {
            table.insert(k.clone(), v.clone());
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError(format!("[run]: {e}")))?;
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    /// Fully resolved copy: the `[run]` table lists every field.
    pub fn resolved(&self, run: &RunConfig) -> anyhow::Result<Self> {
        Ok(ExperimentConfig { run: toml::Table::try_from(run).context("encoding run settings")?, ..self.clone() })
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self).context("encoding experiment config")?)
    }

    pub fn first_seed(&self) -> Option<u64> {
        self.seeds.first().copied()
    }

    pub fn check_seeds(&self) -> anyhow::Result<()> {
        if self.seeds.is_empty() {
            bail!(ConfigError("at least one seed is required".into()));
        }
        Ok(())
    }
}

/// Marks an error as a problem with user-supplied settings.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError(e.to_string())
    }
}
