use serde::{Deserialize, Serialize};

use crate::error::{CutsError, Result};
use crate::numgrad::{AdamConfig, DEFAULT_NEGATIVE_SLOPE};

/// Switches for the ablation variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    /// Imputation rate forced to zero; the graph is fit on the initial fill.
    pub no_imputation: bool,
    /// Imputation predictions use every input instead of sampled edges.
    pub no_cpg_for_imputation: bool,
    /// Skips the fine-tuning phase.
    pub no_finetune: bool,
}

/// Named ablation variant, as used on the command line and in sweep tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    NoImputation,
    NoCpgForImputation,
    NoFinetune,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoImputation, Ablation::NoCpgForImputation, Ablation::NoFinetune];

    pub fn flags(self) -> Ablations {
        let mut a = Ablations::default();
        match self {
            Ablation::Full => {}
            Ablation::NoImputation => a.no_imputation = true,
            Ablation::NoCpgForImputation => a.no_cpg_for_imputation = true,
            Ablation::NoFinetune => a.no_finetune = true,
        }
        a
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoImputation => "no-imputation",
            Ablation::NoCpgForImputation => "no-cpg-for-imputation",
            Ablation::NoFinetune => "no-finetune",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CutsError::Config(format!("unknown ablation {s:?}")))
    }
}

/// Every hyperparameter of one run. Defaults follow the VAR benchmark
/// settings; [`RunConfig::lorenz96`] gives the Lorenz-96 column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Warm-up epochs (no imputation).
    pub n1: usize,
    /// Epochs with imputation updates.
    pub n2: usize,
    /// Fine-tuning epochs.
    pub n3: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub lr_data: f64,
    pub lr_graph: f64,
    /// Both learning rates decay exponentially to this fraction.
    pub lr_decay_to: f64,
    pub gumbel_tau_start: f64,
    pub gumbel_tau_end: f64,
    pub batch_size: usize,
    /// Maximum lag, also the predictor's input window.
    pub input_step: usize,
    pub hidden_features: usize,
    /// Number of affine layers in each predictor.
    pub network_layers: usize,
    pub weight_decay: f64,
    pub negative_slope: f64,
    /// Initial edge logit; 0 starts every edge at probability one half.
    pub theta_init: f64,
    /// Z-score each series (observed entries) before training.
    pub standardize: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub ablation: Ablations,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::var()
    }
}

impl RunConfig {
    pub fn var() -> Self {
        RunConfig {
            n1: 5,
            n2: 15,
            n3: 30,
            alpha: 0.1,
            lambda: 0.1,
            lr_data: 1e-4,
            lr_graph: 1e-2,
            lr_decay_to: 0.1,
            gumbel_tau_start: 1.0,
            gumbel_tau_end: 0.1,
            batch_size: 128,
            input_step: 3,
            hidden_features: 128,
            network_layers: 3,
            weight_decay: 0.001,
            negative_slope: DEFAULT_NEGATIVE_SLOPE,
            theta_init: 0.0,
            standardize: true,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            ablation: Ablations::default(),
        }
    }

    pub fn lorenz96() -> Self {
        RunConfig { n1: 50, n2: 150, n3: 300, alpha: 0.01, lambda: 0.3, weight_decay: 0.0, ..RunConfig::var() }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation.flags();
        self
    }

    /// Fine-tuning epochs actually run.
    pub fn finetune_epochs(&self) -> usize {
        if self.ablation.no_finetune {
            0
        } else {
            self.n3
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.n1 + self.n2 + self.finetune_epochs()
    }

    /// Imputation rate in effect.
    pub fn effective_alpha(&self) -> f64 {
        if self.ablation.no_imputation {
            0.0
        } else {
            self.alpha
        }
    }

    pub fn adam(&self, weight_decay: f64) -> AdamConfig {
        AdamConfig { beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps, weight_decay }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CutsError::Config(msg));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.batch_size == 0 || self.input_step == 0 || self.network_layers == 0 || self.hidden_features == 0 {
            return bad("batch_size, input_step, network_layers and hidden_features must be positive".into());
        }
        for (name, v) in [("lr_data", self.lr_data), ("lr_graph", self.lr_graph), ("lr_decay_to", self.lr_decay_to)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.gumbel_tau_start > 0.0 && self.gumbel_tau_end > 0.0) {
            return bad("Gumbel temperatures must be positive".into());
        }
        if !(self.weight_decay >= 0.0) || !self.theta_init.is_finite() {
            return bad("weight_decay must be non-negative and theta_init finite".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam betas must lie in [0, 1) and eps be positive".into());
        }
        Ok(())
    }
}
