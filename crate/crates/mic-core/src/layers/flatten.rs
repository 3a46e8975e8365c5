//! Row-major flatten that preserves the batch axis.

use crate::error::{Error, Result};
use crate::layers::LayerContext;
use crate::tensor::{Float, Tensor};

#[derive(Debug, Clone, Copy, Default)]
pub struct Flatten;

impl Flatten {
    pub fn forward<E: Float>(&self, x: &Tensor<E>) -> Result<(Tensor<E>, LayerContext<E>)> {
        if x.rank() < 2 {
            return Err(Error::shape(
                "flatten",
                format!("need a batch axis, got {:?}", x.shape()),
            ));
        }
        let in_shape = x.shape().to_vec();
        let n = in_shape[0];
        let per_sample: usize = in_shape[1..].iter().product();
        let y = x
            .clone()
            .reshape(vec![n, per_sample])
            .expect("flatten reshape");
        Ok((y, LayerContext::Flatten { in_shape }))
    }

    pub fn backward<E: Float>(&self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::Flatten { in_shape } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        dy.clone().reshape(in_shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_flat_is_unchanged() {
        let x = Tensor::new(vec![2, 3], (0..6).map(|v| v as f32).collect::<Vec<_>>()).unwrap();
        let (y, _) = Flatten.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn row_major_layout_preserved() {
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = Flatten.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 4]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn round_trip_restores_shape() {
        for shape in [vec![2, 3, 4, 5], vec![1, 7, 2, 3], vec![4, 6]] {
            let len = shape.iter().product();
            let x = Tensor::new(
                shape.clone(),
                (0..len).map(|v| v as f32).collect::<Vec<_>>(),
            )
            .unwrap();
            let (y, ctx) = Flatten.forward(&x).unwrap();
            let back = Flatten.backward(ctx, &y).unwrap();
            assert_eq!(back, x);
        }
    }
}
