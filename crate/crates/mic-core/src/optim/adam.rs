//! Adam with bias correction; gradients are consumed (zeroed) by each step.

use crate::error::{Error, Result};
use crate::layers::Parameter;
use crate::tensor::Float;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct Adam {
    /// Completed step count; bias correction uses `t` starting at 1.
    t: u64,
}

impl Adam {
    pub fn new() -> Self {
        Self { t: 0 }
    }

    /// Resume from a checkpointed step counter.
    pub fn resume_at(t: u64) -> Self {
        Self { t }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update over every parameter. Errors (naming the parameter) on a
    /// non-finite gradient; zeroes all gradients afterward.
    pub fn step<E: Float>(&mut self, params: &mut [&mut Parameter<E>], lr: f64) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let b1 = E::from_f64(BETA1);
        let b2 = E::from_f64(BETA2);
        let one_minus_b1 = E::from_f64(1.0 - BETA1);
        let one_minus_b2 = E::from_f64(1.0 - BETA2);
        let corr1 = E::from_f64(1.0 - BETA1.powf(t as f64));
        let corr2 = E::from_f64(1.0 - BETA2.powf(t as f64));
        let lr_e = E::from_f64(lr);
        let eps = E::from_f64(EPS);

        for p in params.iter_mut() {
            if !p.grad.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter `{}` is not finite at step {t}",
                    p.name
                )));
            }
            let m = p.adam_m.data_mut();
            let v = p.adam_v.data_mut();
            let g = p.grad.data_mut();
            for (((w, g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(g.iter_mut())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + one_minus_b1 * *g;
                *v = b2 * *v + one_minus_b2 * *g * *g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *w = *w - lr_e * m_hat / (v_hat.sqrt() + eps);
                *g = E::ZERO;
            }
        }
        Ok(())
    }
}

impl Default for Adam {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_param(w: f64) -> Parameter<f64> {
        Parameter::new("w", Tensor::scalar(w), 0.0)
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = scalar_param(1.5);
        let mut adam = Adam::new();
        adam.step(&mut [&mut p], 0.1).unwrap();
        assert_eq!(p.value.data()[0], 1.5);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_almost_lr() {
        let mut p = scalar_param(0.0);
        p.grad.data_mut()[0] = 1.0;
        let mut adam = Adam::new();
        adam.step(&mut [&mut p], 0.01).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        let expected = -0.01 / (1.0 + EPS);
        assert!((p.value.data()[0] - expected).abs() < 1e-12);
        // Gradient was consumed.
        assert_eq!(p.grad.data()[0], 0.0);
    }

    #[test]
    fn descends_a_quadratic_to_near_zero() {
        // f(w) = w^2, df/dw = 2w, from w = 5 with lr 0.1.
        let mut p = scalar_param(5.0);
        let mut adam = Adam::new();
        for _ in 0..100 {
            p.grad.data_mut()[0] = 2.0 * p.value.data()[0];
            adam.step(&mut [&mut p], 0.1).unwrap();
        }
        let w = p.value.data()[0];
        assert!(w.abs() < 0.5, "w after 100 steps: {w}");
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut p = scalar_param(0.0);
        p.name = "block1.conv.kernel".into();
        p.grad.data_mut()[0] = f64::NAN;
        let mut adam = Adam::new();
        let err = adam.step(&mut [&mut p], 0.1).unwrap_err().to_string();
        assert!(err.contains("block1.conv.kernel"), "{err}");
    }

    #[test]
    fn resume_continues_bias_correction() {
        // Two fresh steps vs one step, checkpointed t, one resumed step.
        let run = |resume: bool| {
            let mut p = scalar_param(1.0);
            let mut adam = Adam::new();
            p.grad.data_mut()[0] = 0.3;
            adam.step(&mut [&mut p], 0.05).unwrap();
            let mut adam = if resume {
                Adam::resume_at(adam.steps())
            } else {
                adam
            };
            p.grad.data_mut()[0] = -0.2;
            adam.step(&mut [&mut p], 0.05).unwrap();
            p.value.data()[0]
        };
        assert_eq!(run(false).to_bits(), run(true).to_bits());
    }
}
