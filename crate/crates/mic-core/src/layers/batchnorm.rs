//! Batch normalization over the channel axis of NHWC tensors.

use crate::error::{Error, Result};
use crate::layers::{nhwc, LayerContext, Mode, Parameter};
use crate::tensor::{Float, Tensor};

/// Per-channel normalization. Training mode normalizes with batch statistics
/// (biased variance over n*h*w elements) and folds them into the running
/// estimates; inference mode normalizes with the running estimates only.
///
/// The running-stat momentum defaults to 0.9: short runs (a few hundred
/// optimizer steps) never shake off the (0, 1) initialization at 0.99, which
/// leaves inference normalizing with statistics dominated by the init rather
/// than the data. Both values share the same update rule and stationary
/// behavior.
#[derive(Debug, Clone)]
pub struct BatchNorm<E: Float = f32> {
    pub gamma: Parameter<E>,
    pub beta: Parameter<E>,
    pub running_mean: Tensor<E>,
    pub running_var: Tensor<E>,
    pub momentum: f64,
    pub eps: f64,
}

impl<E: Float> BatchNorm<E> {
    pub const DEFAULT_EPS: f64 = 1e-3;
    pub const DEFAULT_MOMENTUM: f64 = 0.9;

    pub fn new(channels: usize, name_prefix: &str) -> Self {
        Self {
            gamma: Parameter::new(
                format!("{name_prefix}.gamma"),
                Tensor::full(vec![channels], E::ONE),
                0.0,
            ),
            beta: Parameter::new(
                format!("{name_prefix}.beta"),
                Tensor::zeros(vec![channels]),
                0.0,
            ),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::full(vec![channels], E::ONE),
            momentum: Self::DEFAULT_MOMENTUM,
            eps: Self::DEFAULT_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn forward(&mut self, x: &Tensor<E>, mode: Mode) -> Result<(Tensor<E>, LayerContext<E>)> {
        let [n, h, w, c] = nhwc(x, "batchnorm")?;
        if c != self.channels() {
            return Err(Error::shape(
                "batchnorm",
                format!("input has {c} channels, layer has {}", self.channels()),
            ));
        }
        let count = n * h * w;
        let eps = E::from_f64(self.eps);

        let (mean, var) = match mode {
            Mode::Training => {
                if count < 2 {
                    return Err(Error::invalid(
                        "batchnorm training requires at least 2 elements per channel",
                    ));
                }
                let (mean, var) = channel_stats(x.data(), c, count);
                let m = E::from_f64(self.momentum);
                let one_minus = E::ONE - m;
                for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&mean) {
                    *r = m * *r + one_minus * b;
                }
                for (r, &b) in self.running_var.data_mut().iter_mut().zip(&var) {
                    *r = m * *r + one_minus * b;
                }
                (mean, var)
            }
            Mode::Inference => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };

        let inv_std: Vec<E> = var.iter().map(|&v| E::ONE / (v + eps).sqrt()).collect();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut xhat = Tensor::<E>::zeros(vec![n, h, w, c]);
        let mut y = Tensor::<E>::zeros(vec![n, h, w, c]);
        {
            let xh = xhat.data_mut();
            let yd = y.data_mut();
            for (i, &v) in x.data().iter().enumerate() {
                let ch = i % c;
                let norm = (v - mean[ch]) * inv_std[ch];
                xh[i] = norm;
                yd[i] = gamma[ch] * norm + beta[ch];
            }
        }
        Ok((y, LayerContext::BatchNorm { xhat, inv_std }))
    }

    /// Full analytic gradient, including the dependence of the batch mean and
    /// variance on the input. Only valid for contexts produced in Training
    /// mode (inference-time backprop is never needed here).
    pub fn backward(&mut self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::BatchNorm { xhat, inv_std } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        let [n, h, w, c] = nhwc(dy, "batchnorm backward")?;
        if xhat.shape() != dy.shape() {
            return Err(Error::shape(
                "batchnorm backward",
                format!(
                    "dy {:?} does not match cached {:?}",
                    dy.shape(),
                    xhat.shape()
                ),
            ));
        }
        let count = n * h * w;
        let inv_count = E::ONE / E::from_f64(count as f64);

        // Per-channel reductions in row-major visit order.
        let mut sum_dy = vec![E::ZERO; c];
        let mut sum_dy_xhat = vec![E::ZERO; c];
        for (i, (&g, &xh)) in dy.data().iter().zip(xhat.data()).enumerate() {
            let ch = i % c;
            sum_dy[ch] += g;
            sum_dy_xhat[ch] += g * xh;
        }
        for (gg, &s) in self.gamma.grad.data_mut().iter_mut().zip(&sum_dy_xhat) {
            *gg += s;
        }
        for (bg, &s) in self.beta.grad.data_mut().iter_mut().zip(&sum_dy) {
            *bg += s;
        }

        let gamma = self.gamma.value.data();
        let mut dx = Tensor::<E>::zeros(vec![n, h, w, c]);
        {
            let dxd = dx.data_mut();
            for (i, (&g, &xh)) in dy.data().iter().zip(xhat.data()).enumerate() {
                let ch = i % c;
                let centered = g - sum_dy[ch] * inv_count - xh * sum_dy_xhat[ch] * inv_count;
                dxd[i] = gamma[ch] * inv_std[ch] * centered;
            }
        }
        Ok(dx)
    }
}

/// Biased per-channel mean and variance; accumulation order is the row-major
/// element order, fixed for bit determinism.
fn channel_stats<E: Float>(data: &[E], c: usize, count: usize) -> (Vec<E>, Vec<E>) {
    let inv = E::ONE / E::from_f64(count as f64);
    let mut mean = vec![E::ZERO; c];
    for (i, &v) in data.iter().enumerate() {
        mean[i % c] += v;
    }
    for m in &mut mean {
        *m = *m * inv;
    }
    let mut var = vec![E::ZERO; c];
    for (i, &v) in data.iter().enumerate() {
        let d = v - mean[i % c];
        var[i % c] += d * d;
    }
    for v in &mut var {
        *v = *v * inv;
    }
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{rng_uniform, RngStream};

    #[test]
    fn normalized_input_is_near_fixed_point() {
        // Batch is already zero-mean unit-variance per channel.
        let data = vec![-1.0f32, 1.0, 1.0, -1.0];
        let x = Tensor::new(vec![2, 1, 2, 1], data).unwrap();
        let mut bn = BatchNorm::<f32>::new(1, "bn");
        let (y, _) = bn.forward(&x, Mode::Training).unwrap();
        for (&yo, &xi) in y.iter().zip(x.iter()) {
            // eps shrinks the output slightly.
            assert!((yo - xi).abs() < 1e-3, "{yo} vs {xi}");
        }
    }

    #[test]
    fn zero_gamma_outputs_beta() {
        let mut bn = BatchNorm::<f32>::new(2, "bn");
        for g in bn.gamma.value.data_mut() {
            *g = 0.0;
        }
        bn.beta.value.data_mut().copy_from_slice(&[0.25, -0.5]);
        let mut rng = RngStream::new(4, 0);
        let x = rng_uniform::<f32>(&mut rng, 0.0, 4.0, vec![2, 2, 2, 2]).unwrap();
        let (y, _) = bn.forward(&x, Mode::Training).unwrap();
        for (i, &v) in y.data().iter().enumerate() {
            assert_eq!(v, bn.beta.value.data()[i % 2]);
        }
    }

    #[test]
    fn training_stats_oracle() {
        // Spread the input wide so eps is negligible next to the variance.
        let mut rng = RngStream::new(17, 0);
        let x = rng_uniform::<f32>(&mut rng, 0.0, 10.0, vec![4, 4, 4, 2]).unwrap();
        let mut bn = BatchNorm::<f32>::new(2, "bn");
        let (_, ctx) = bn.forward(&x, Mode::Training).unwrap();
        let LayerContext::BatchNorm { xhat, .. } = ctx else {
            panic!()
        };
        for ch in 0..2 {
            let vals: Vec<f64> = xhat
                .data()
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == ch)
                .map(|(_, &v)| v as f64)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-5, "channel {ch} mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "channel {ch} var {var}");
        }
    }

    #[test]
    fn single_element_population_rejected_in_training() {
        let x = Tensor::<f32>::zeros(vec![1, 1, 1, 3]);
        let mut bn = BatchNorm::<f32>::new(3, "bn");
        assert!(bn.forward(&x, Mode::Training).is_err());
        // Inference mode is fine with one element.
        assert!(bn.forward(&x, Mode::Inference).is_ok());
    }

    #[test]
    fn inference_uses_running_stats_and_never_updates() {
        let mut bn = BatchNorm::<f32>::new(1, "bn");
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&x, Mode::Training).unwrap();
        let rm = bn.running_mean.clone();
        let rv = bn.running_var.clone();
        let (y1, _) = bn.forward(&x, Mode::Inference).unwrap();
        let (y2, _) = bn.forward(&x, Mode::Inference).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(bn.running_mean, rm);
        assert_eq!(bn.running_var, rv);
    }

    #[test]
    fn running_stats_blend_with_momentum() {
        let mut bn = BatchNorm::<f32>::new(1, "bn");
        let x = Tensor::new(vec![1, 1, 4, 1], vec![0.0f32, 2.0, 4.0, 6.0]).unwrap();
        bn.forward(&x, Mode::Training).unwrap();
        // batch mean 3, biased var 5; running starts at (0, 1).
        let m = BatchNorm::<f32>::DEFAULT_MOMENTUM as f32;
        assert!((bn.running_mean.data()[0] - (1.0 - m) * 3.0).abs() < 1e-6);
        assert!((bn.running_var.data()[0] - (m + (1.0 - m) * 5.0)).abs() < 1e-6);
    }
}
