//! Losses, L2 penalty, Adam, step-decay scheduling, early stopping, and the
//! epoch training loop.

mod adam;
mod early_stop;
mod losses;
mod train;

pub use adam::Adam;
pub use early_stop::{EarlyStopState, StopDecision};
pub use losses::{binary_ce_loss, l2_penalty, l2_penalty_and_grad, sparse_ce_loss};
pub use train::{evaluate, fit, EpochRecord, Evaluation, TrainingHistory};

use crate::error::{Error, Result};

/// Knobs for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: u32,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Multiplicative decay factor applied every `lr_decay_every` epochs.
    pub lr_decay_factor: f64,
    pub lr_decay_every: u32,
    pub patience: u32,
    pub min_delta: f64,
    pub seed: u64,
    /// Reserved switch: every built-in kernel already preserves elementwise
    /// reduction order, so results are bit-reproducible whether or not data
    /// parallelism is active. Recorded in run manifests.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            batch_size: 32,
            base_lr: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 10,
            patience: 5,
            min_delta: 0.0,
            seed: 0,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.base_lr < 0.0 || !self.base_lr.is_finite() {
            return Err(Error::invalid(
                "base_lr must be a finite non-negative number",
            ));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::invalid("lr_decay_factor must be in (0, 1]"));
        }
        if self.lr_decay_every < 1 {
            return Err(Error::invalid("lr_decay_every must be >= 1"));
        }
        if self.patience < 1 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if self.min_delta < 0.0 {
            return Err(Error::invalid("min_delta must be >= 0"));
        }
        Ok(())
    }
}

/// Step-decay schedule: `base_lr * factor^floor((epoch - 1) / every)` for a
/// 1-based epoch index.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: u32) -> Result<f64> {
    if epoch < 1 {
        return Err(Error::invalid("epoch index is 1-based; got 0"));
    }
    let steps = ((epoch - 1) / cfg.lr_decay_every) as i32;
    Ok(cfg.base_lr * cfg.lr_decay_factor.powi(steps))
}
