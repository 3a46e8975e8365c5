//! The epoch training loop and model evaluation.

use crate::data::DataSource;
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::metrics::{accuracy, ConfusionMatrix};
use crate::model::{predicted_classes, streams, HeadActivation, Model};
use crate::optim::{
    binary_ce_loss, l2_penalty, l2_penalty_and_grad, lr_at_epoch, sparse_ce_loss, Adam,
    EarlyStopState, StopDecision, TrainConfig,
};
use crate::tensor::RngStream;

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Epochs must be consecutive from 1 with finite values.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.epochs.iter().enumerate() {
            if row.epoch != i as u32 + 1 {
                return Err(Error::invalid(format!(
                    "history epochs must be consecutive from 1; row {i} has epoch {}",
                    row.epoch
                )));
            }
            let vals = [
                row.lr,
                row.train_loss,
                row.train_acc,
                row.val_loss,
                row.val_acc,
            ];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "history row {} has a non-finite value",
                    row.epoch
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Mean data loss plus the L2 penalty, matching the training-time
    /// reported loss.
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Full training run: per epoch, a shuffled training pass (forward, fused
/// loss, backward, L2, Adam) followed by a full validation pass, history
/// recording, and early stopping. The model ends holding the best-epoch
/// weights.
pub fn fit(
    model: &mut Model<f32>,
    train: &DataSource,
    val: &DataSource,
    cfg: &TrainConfig,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training source has no records"));
    }
    if val.is_empty() {
        return Err(Error::invalid("validation source has no records"));
    }

    let mut adam = Adam::new();
    let mut early = EarlyStopState::new(cfg.patience, cfg.min_delta);
    let mut history = TrainingHistory::default();

    for epoch in 1..=cfg.max_epochs {
        let lr = lr_at_epoch(cfg, epoch)?;
        let (train_loss, train_acc) = train_one_epoch(model, train, cfg, &mut adam, epoch, lr)?;

        let eval = evaluate(model, val)?;
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            train_acc,
            val_loss: eval.loss,
            val_acc: eval.accuracy,
        });

        if early.update(epoch, eval.loss, model) == StopDecision::Stop {
            if early.failed() {
                return Err(Error::NonFinite(format!(
                    "validation loss became non-finite at epoch {epoch}"
                )));
            }
            break;
        }
    }
    early.restore_best(model);
    Ok(history)
}

fn train_one_epoch(
    model: &mut Model<f32>,
    train: &DataSource,
    cfg: &TrainConfig,
    adam: &mut Adam,
    epoch: u32,
    lr: f64,
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let mut seen = 0usize;

    for (batch_index, batch) in train.epoch_batches(epoch, true).enumerate() {
        let step = |model: &mut Model<f32>, adam: &mut Adam| -> Result<(f64, Vec<usize>, usize)> {
            let batch = batch?;
            let mut dropout_rng = RngStream::derive(
                cfg.seed,
                &[streams::DROPOUT, epoch as u64, batch_index as u64],
            );
            let (probs, ctxs) = model.forward(&batch.inputs, Mode::Training, &mut dropout_rng)?;
            let (data_loss, dlogits) = match model.head {
                HeadActivation::Softmax => sparse_ce_loss(&probs, &batch.labels)?,
                HeadActivation::Sigmoid => binary_ce_loss(&probs, &batch.labels)?,
            };
            model.backward(ctxs, &dlogits)?;
            let penalty = l2_penalty_and_grad(model);
            let total_loss = data_loss + penalty;
            if !total_loss.is_finite() {
                return Err(Error::NonFinite("training loss became non-finite".into()));
            }
            let mut params = model.params_mut();
            adam.step(&mut params, lr)?;
            let preds = predicted_classes(&probs, model.head);
            let hits = preds
                .iter()
                .zip(&batch.labels)
                .filter(|(p, y)| p == y)
                .count();
            Ok((total_loss, batch.labels, hits))
        };
        let (total_loss, labels, hits) = step(model, adam).map_err(|e| match e {
            Error::NonFinite(msg) => {
                Error::NonFinite(format!("epoch {epoch}, batch {batch_index}: {msg}"))
            }
            other => Error::Invalid(format!("epoch {epoch}, batch {batch_index}: {other}")),
        })?;
        correct += hits;
        seen += labels.len();
        loss_sum += total_loss * labels.len() as f64;
    }

    if seen == 0 {
        return Err(Error::invalid("training source yielded no samples"));
    }
    Ok((loss_sum / seen as f64, correct as f64 / seen as f64))
}

/// Inference-mode pass over a source: mean data loss plus the L2 penalty,
/// accuracy, and the full confusion matrix.
pub fn evaluate(model: &mut Model<f32>, source: &DataSource) -> Result<Evaluation> {
    if source.is_empty() {
        return Err(Error::invalid("evaluation source has no records"));
    }
    let k = model.spec.num_classes;
    let mut cm = ConfusionMatrix::new(k)?;
    let mut loss_sum = 0.0f64;
    let mut seen = 0usize;

    for batch in source.epoch_batches(1, false) {
        let batch = batch?;
        let probs = model.predict(&batch.inputs)?;
        let (data_loss, _) = match model.head {
            HeadActivation::Softmax => sparse_ce_loss(&probs, &batch.labels)?,
            HeadActivation::Sigmoid => binary_ce_loss(&probs, &batch.labels)?,
        };
        let preds = predicted_classes(&probs, model.head);
        for (&y, &p) in batch.labels.iter().zip(&preds) {
            cm.record(y, p)?;
        }
        loss_sum += data_loss * batch.len() as f64;
        seen += batch.len();
    }

    let loss = loss_sum / seen as f64 + l2_penalty(model);
    let accuracy = accuracy(&cm)?;
    Ok(Evaluation {
        loss,
        accuracy,
        confusion: cm,
    })
}
