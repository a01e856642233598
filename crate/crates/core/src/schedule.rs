use crate::config::Precision;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub decay_steps: u64,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Also snapshot every this many epochs; 0 keeps only the best.
    pub checkpoint_every: usize,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            base_lr: 0.0025,
            peak_lr: 0.05,
            warmup_steps: 200,
            decay_steps: 2000,
            epochs: 100,
            seed: 0,
            patience: 10,
            checkpoint_every: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CoreError::Config("batch size must be at least 1".into()));
        }
        if !(self.base_lr > 0.0 && self.peak_lr >= self.base_lr) {
            return Err(CoreError::Config(format!(
                "learning rates need peak ({}) >= base ({}) > 0",
                self.peak_lr, self.base_lr
            )));
        }
        Ok(())
    }
}

/// Linear warmup base→peak, cosine decay peak→base, then constant base.
pub fn lr_schedule(step: u64, cfg: &TrainConfig) -> f64 {
    let (base, peak) = (cfg.base_lr, cfg.peak_lr);
    if step < cfg.warmup_steps {
        return base + (peak - base) * step as f64 / cfg.warmup_steps as f64;
    }
    let t = step - cfg.warmup_steps;
    if t >= cfg.decay_steps {
        return base;
    }
    let frac = t as f64 / cfg.decay_steps as f64;
    base + (peak - base) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}
