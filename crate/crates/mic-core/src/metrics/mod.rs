//! Evaluation metrics and training-history persistence.

mod curves;
mod history;

pub use curves::render_curves_svg;
pub use history::{read_history_csv, write_history_csv, HISTORY_CSV_HEADER};

use crate::error::{Error, Result};

/// k x k table of true-class rows against predicted-class columns. For the
/// binary head, class 1 is the positive class, so counts[1][1] = TP,
/// counts[0][0] = TN, counts[0][1] = FP, counts[1][0] = FN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("confusion matrix needs at least 2 classes"));
        }
        Ok(Self {
            counts: vec![vec![0; k]; k],
        })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) -> Result<()> {
        let k = self.classes();
        if true_class >= k || predicted >= k {
            return Err(Error::invalid(format!(
                "class pair ({true_class}, {predicted}) out of range for {k} classes"
            )));
        }
        self.counts[true_class][predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes() != other.classes() {
            return Err(Error::invalid(
                "cannot merge confusion matrices of different sizes",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }
}

/// Tally true/predicted pairs into a k x k confusion matrix.
pub fn confusion(labels: &[usize], predictions: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(k)?;
    for (&y, &p) in labels.iter().zip(predictions) {
        cm.record(y, p)?;
    }
    Ok(cm)
}

/// Fraction of correctly classified samples: trace over total. In the binary
/// case this is (TP + TN) / (TP + FP + TN + FN), the standard definition.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("accuracy of an empty confusion matrix"));
    }
    let trace: u64 = (0..cm.classes()).map(|i| cm.count(i, i)).sum();
    Ok(trace as f64 / total as f64)
}
