//! Fully connected layer: `y = x W + b`.

use crate::error::{Error, Result};
use crate::layers::{LayerContext, Parameter};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Float, Tensor};

#[derive(Debug, Clone)]
pub struct Dense<E: Float = f32> {
    /// Shape `[din, dout]`.
    pub weight: Parameter<E>,
    /// Shape `[dout]`.
    pub bias: Parameter<E>,
}

impl<E: Float> Dense<E> {
    pub fn new(weight: Parameter<E>, bias: Parameter<E>) -> Result<Self> {
        match weight.value.shape() {
            [_, dout] if bias.value.shape() == [*dout] => Ok(Self { weight, bias }),
            ws => Err(Error::shape(
                "dense",
                format!(
                    "weight must be [din, dout] with matching bias, got {ws:?} and {:?}",
                    bias.value.shape()
                ),
            )),
        }
    }

    pub fn din(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn dout(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<E>) -> Result<(Tensor<E>, LayerContext<E>)> {
        match x.shape() {
            [_, din] if *din == self.din() => {}
            s => {
                return Err(Error::shape(
                    "dense",
                    format!(
                        "input {s:?} incompatible with weight {:?}",
                        self.weight.value.shape()
                    ),
                ))
            }
        }
        let mut y = matmul(x, &self.weight.value)?;
        let dout = self.dout();
        let bias = self.bias.value.data();
        for row in y.data_mut().chunks_mut(dout) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        Ok((y, LayerContext::Dense { input: x.clone() }))
    }

    pub fn backward(&mut self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::Dense { input } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        let dout = self.dout();
        if dy.shape() != [input.shape()[0], dout] {
            return Err(Error::shape(
                "dense backward",
                format!(
                    "dy {:?} does not match [{}, {dout}]",
                    dy.shape(),
                    input.shape()[0]
                ),
            ));
        }
        // dW = x^T dy
        let dw = matmul_tn(&input, dy)?;
        for (g, &v) in self.weight.grad.data_mut().iter_mut().zip(dw.data()) {
            *g += v;
        }
        // db = column sums of dy
        {
            let db = self.bias.grad.data_mut();
            for row in dy.data().chunks(dout) {
                for (g, &v) in db.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }
        // dx = dy W^T
        matmul_nt(dy, &self.weight.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from(w: Tensor<f32>, b: Tensor<f32>) -> Dense<f32> {
        Dense::new(Parameter::new("w", w, 0.0), Parameter::new("b", b, 0.0)).unwrap()
    }

    #[test]
    fn identity_weight_zero_bias_is_identity() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let d = dense_from(w, Tensor::zeros(vec![2]));
        let x = Tensor::new(vec![2, 2], vec![3.0, -1.0, 0.5, 2.0]).unwrap();
        let (y, _) = d.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn affine_definition() {
        let w = Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![3.0]).unwrap();
        let d = dense_from(w, b);
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let (y, _) = d.forward(&x).unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn input_width_mismatch_is_error() {
        let d = dense_from(Tensor::zeros(vec![3, 2]), Tensor::zeros(vec![2]));
        let x = Tensor::<f32>::zeros(vec![1, 4]);
        assert!(d.forward(&x).is_err());
    }

    #[test]
    fn backward_shapes_and_values() {
        // y = xW, dW = x^T dy, dx = dy W^T, db = colsum dy.
        let w = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut d = dense_from(w, Tensor::zeros(vec![2]));
        let x = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let (_, ctx) = d.forward(&x).unwrap();
        let dy = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let dx = d.backward(ctx, &dy).unwrap();
        assert_eq!(dx.data(), &[1.0, 3.0]); // W^T first column
        assert_eq!(d.weight.grad.data(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(d.bias.grad.data(), &[1.0, 0.0]);
    }
}
