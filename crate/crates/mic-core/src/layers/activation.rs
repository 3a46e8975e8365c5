//! ReLU layer plus the softmax/sigmoid head activations.
//!
//! Softmax and sigmoid have no standalone backward; their gradients are fused
//! with the matching loss (see `optim::losses`), which yields the simple
//! `(probs - target)/n` form.

use crate::error::{Error, Result};
use crate::layers::LayerContext;
use crate::tensor::{Float, Tensor};

#[derive(Debug, Clone, Copy, Default)]
pub struct Relu;

impl Relu {
    pub fn forward<E: Float>(&self, x: &Tensor<E>) -> Result<(Tensor<E>, LayerContext<E>)> {
        let active: Vec<bool> = x.iter().map(|&v| v > E::ZERO).collect();
        let y = x.map(|v| v.maximum(E::ZERO));
        Ok((y, LayerContext::Relu { active }))
    }

    /// Subgradient 0 at exactly 0.
    pub fn backward<E: Float>(&self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::Relu { active } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        if active.len() != dy.len() {
            return Err(Error::shape(
                "relu backward",
                format!(
                    "dy has {} elements, cached mask has {}",
                    dy.len(),
                    active.len()
                ),
            ));
        }
        let mut dx = dy.clone();
        for (g, on) in dx.data_mut().iter_mut().zip(active) {
            if !on {
                *g = E::ZERO;
            }
        }
        Ok(dx)
    }
}

/// Row-wise softmax with max subtraction for overflow stability.
pub fn softmax<E: Float>(logits: &Tensor<E>) -> Result<Tensor<E>> {
    let [_, k] = match logits.shape() {
        [n, k] => [*n, *k],
        s => {
            return Err(Error::shape(
                "softmax",
                format!("expected [n, k] logits, got {s:?}"),
            ))
        }
    };
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let mut max = row[0];
        for &v in row.iter() {
            max = max.maximum(v);
        }
        let mut sum = E::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = E::ONE / sum;
        for v in row.iter_mut() {
            *v = *v * inv;
        }
    }
    Ok(out)
}

/// Elementwise logistic function.
pub fn sigmoid<E: Float>(z: &Tensor<E>) -> Tensor<E> {
    z.map(|v| E::ONE / (E::ONE + (-v).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_identity_on_nonnegatives() {
        let x = Tensor::new(vec![4], vec![0.0f32, 1.0, 2.5, 7.0]).unwrap();
        let (y, _) = Relu.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::new(vec![3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        let (y, _) = Relu.forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_backward_masks_and_zeroes_the_kink() {
        let x = Tensor::new(vec![3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        let (_, ctx) = Relu.forward(&x).unwrap();
        let dy = Tensor::full(vec![3], 1.0f32);
        let dx = Relu.backward(ctx, &dy).unwrap();
        assert_eq!(dx.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let z = Tensor::<f32>::zeros(vec![1, 3]);
        let p = softmax(&z).unwrap();
        for &v in p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_is_overflow_stable() {
        let z = Tensor::new(vec![1, 3], vec![1000.0f32, 0.0, 0.0]).unwrap();
        let p = softmax(&z).unwrap();
        assert!(p.all_finite());
        assert!((p.data()[0] - 1.0).abs() < 1e-6);
        assert!(p.data()[1] < 1e-6 && p.data()[2] < 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one_in_unit_interval() {
        let z = Tensor::new(vec![2, 3], vec![0.3f32, -2.0, 5.0, 1.0, 1.0, 1.0]).unwrap();
        let p = softmax(&z).unwrap();
        for row in p.data().chunks(3) {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let z = Tensor::new(vec![1, 1], vec![0.0f32]).unwrap();
        assert_eq!(sigmoid(&z).data(), &[0.5]);
    }
}
