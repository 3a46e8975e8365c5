//! Early stopping on validation loss with best-weights restore.

use crate::model::{Model, ModelState};
use crate::tensor::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the best validation loss seen so far and a bitwise snapshot of the
/// model at that epoch. Improvement means `val_loss < best - min_delta`
/// (strict, so an equal loss does not reset the counter).
#[derive(Debug)]
pub struct EarlyStopState<E: Float = f32> {
    patience: u32,
    min_delta: f64,
    best_loss: f64,
    best_epoch: u32,
    since_improvement: u32,
    snapshot: Option<ModelState<E>>,
    failed: bool,
}

impl<E: Float> EarlyStopState<E> {
    pub fn new(patience: u32, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            since_improvement: 0,
            snapshot: None,
            failed: false,
        }
    }

    pub fn update(&mut self, epoch: u32, val_loss: f64, model: &Model<E>) -> StopDecision {
        if !val_loss.is_finite() {
            self.failed = true;
            return StopDecision::Stop;
        }
        if val_loss < self.best_loss - self.min_delta {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.since_improvement = 0;
            self.snapshot = Some(model.capture_state());
            StopDecision::Continue
        } else {
            self.since_improvement += 1;
            if self.since_improvement >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    /// Restore the best-epoch snapshot into the model, if one exists.
    pub fn restore_best(&self, model: &mut Model<E>) {
        if let Some(state) = &self.snapshot {
            model.restore_state(state);
        }
    }

    pub fn best_epoch(&self) -> u32 {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    /// True when the last update saw a non-finite validation loss.
    pub fn failed(&self) -> bool {
        self.failed
    }
}
