use super::RunConfig;

/// Exponential interpolation from `start` to `end` over `steps` epochs.
fn exp_interp(start: f64, end: f64, epoch: usize, steps: usize) -> f64 {
    if steps <= 1 {
        return start;
    }
    let frac = epoch.min(steps - 1) as f64 / (steps - 1) as f64;
    start * (end / start).powf(frac)
}

/// `lr0 * decay_to^(epoch / (total - 1))`, constant for a single epoch.
pub fn lr_schedule(epoch: usize, total_epochs: usize, lr0: f64, decay_to: f64) -> f64 {
    exp_interp(lr0, lr0 * decay_to, epoch, total_epochs)
}

/// Gumbel temperature: annealed over the first `n1 + n2` epochs, then reset
/// and annealed again over the fine-tuning epochs.
pub fn gumbel_tau_schedule(epoch: usize, config: &RunConfig) -> f64 {
    let main = config.n1 + config.n2;
    let (start, end) = (config.gumbel_tau_start, config.gumbel_tau_end);
    if epoch < main {
        exp_interp(start, end, epoch, main)
    } else {
        exp_interp(start, end, epoch - main, config.finetune_epochs())
    }
}
