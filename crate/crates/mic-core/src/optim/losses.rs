//! Classification losses with gradients fused through the head activation,
//! plus the L2 weight penalty.
//!
//! Fusing softmax/sigmoid with cross-entropy gives the logit gradient
//! `(probs - target) / n` directly, which is both cheaper and numerically
//! safer than backpropagating through the activation.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{Float, Tensor};

/// Probabilities below this are clamped inside the log.
const LOG_CLAMP: f64 = 1e-7;

/// Sparse categorical cross-entropy over softmax outputs.
///
/// Returns the mean loss and the gradient with respect to the pre-softmax
/// logits.
pub fn sparse_ce_loss<E: Float>(probs: &Tensor<E>, labels: &[usize]) -> Result<(f64, Tensor<E>)> {
    let (n, k) = match probs.shape() {
        [n, k] => (*n, *k),
        s => {
            return Err(Error::shape(
                "sparse_ce_loss",
                format!("expected [n, k] probabilities, got {s:?}"),
            ))
        }
    };
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "got {} labels for {n} rows",
            labels.len()
        )));
    }
    let mut loss = 0.0f64;
    let mut dlogits = probs.clone();
    let inv_n = E::ONE / E::from_f64(n as f64);
    for (i, (&label, row)) in labels
        .iter()
        .zip(dlogits.data_mut().chunks_mut(k))
        .enumerate()
    {
        if label >= k {
            return Err(Error::invalid(format!(
                "label {label} out of range for {k} classes (row {i})"
            )));
        }
        loss -= row[label].to_f64().max(LOG_CLAMP).ln();
        row[label] = row[label] - E::ONE;
        for v in row.iter_mut() {
            *v = *v * inv_n;
        }
    }
    Ok((loss / n as f64, dlogits))
}

/// Binary cross-entropy over a single sigmoid unit; labels must be 0 or 1.
///
/// Returns the mean loss and the gradient with respect to the pre-sigmoid
/// logit.
pub fn binary_ce_loss<E: Float>(p: &Tensor<E>, labels: &[usize]) -> Result<(f64, Tensor<E>)> {
    let n = match p.shape() {
        [n, 1] => *n,
        s => {
            return Err(Error::shape(
                "binary_ce_loss",
                format!("expected [n, 1] probabilities, got {s:?}"),
            ))
        }
    };
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "got {} labels for {n} rows",
            labels.len()
        )));
    }
    let mut loss = 0.0f64;
    let mut dlogit = p.clone();
    let inv_n = E::ONE / E::from_f64(n as f64);
    for (i, (&label, v)) in labels.iter().zip(dlogit.data_mut().iter_mut()).enumerate() {
        if label > 1 {
            return Err(Error::invalid(format!(
                "binary label must be 0 or 1, got {label} (row {i})"
            )));
        }
        let prob = v.to_f64().clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        loss -= if label == 1 {
            prob.ln()
        } else {
            (1.0 - prob).ln()
        };
        *v = (*v - E::from_f64(label as f64)) * inv_n;
    }
    Ok((loss / n as f64, dlogit))
}

/// Total penalty `sum over parameters of l2 * sum(w^2)`, walking the
/// registry in order. No gradient side effects.
pub fn l2_penalty<E: Float>(model: &Model<E>) -> f64 {
    let mut penalty = 0.0f64;
    for p in model.params() {
        if p.l2_coeff == 0.0 {
            continue;
        }
        let sq: f64 = p.value.iter().map(|&w| w.to_f64() * w.to_f64()).sum();
        penalty += p.l2_coeff * sq;
    }
    penalty
}

/// As [`l2_penalty`], but also adds `2 * l2 * w` to each regularized
/// parameter's gradient accumulator.
pub fn l2_penalty_and_grad<E: Float>(model: &mut Model<E>) -> f64 {
    let mut penalty = 0.0f64;
    for p in model.params_mut() {
        if p.l2_coeff == 0.0 {
            continue;
        }
        let two_lambda = E::from_f64(2.0 * p.l2_coeff);
        let mut sq = 0.0f64;
        for (g, &w) in p.grad.data_mut().iter_mut().zip(p.value.iter()) {
            sq += w.to_f64() * w.to_f64();
            *g += two_lambda * w;
        }
        penalty += p.l2_coeff * sq;
    }
    penalty
}
