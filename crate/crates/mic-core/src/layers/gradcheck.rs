//! Finite-difference verification of analytic layer gradients.
//!
//! The check runs in f64 with central differences (step 1e-5) against the
//! scalar objective `L = sum(y * R)` for a fixed random weighting `R`, whose
//! gradient with respect to `y` is exactly `R`. Dropout is frozen by handing
//! every forward evaluation a clone of the same RNG stream; batchnorm is
//! checked in Training mode so the mean/variance dependence on the input is
//! part of the gradient.

use crate::error::{Error, Result};
use crate::layers::{Layer, Mode};
use crate::tensor::{rng_uniform, RngStream, Tensor};

pub(crate) const FD_STEP: f64 = 1e-5;

/// Relative error between an analytic and a numeric derivative:
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub(crate) fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (1e-8f64).max(analytic.abs() + numeric.abs())
}

/// One pass/fail row of a gradient-check run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err <= threshold
    }
}

/// Compare the layer's analytic backward against central finite differences
/// for the input and every parameter; returns the maximum relative error.
pub fn gradcheck_layer(layer: &Layer<f64>, input_shape: &[usize], mode: Mode) -> Result<f64> {
    let mut rng = RngStream::new(0xC0FF_EE00, 0);
    let x = sample_off_kink(&mut rng, input_shape);
    // Frozen stream: every forward evaluation replays the same dropout mask.
    let mask_rng = RngStream::new(0xD00D_5EED, 9);

    let mut work = layer.clone();
    for p in work.params_mut() {
        p.zero_grad();
    }
    let (y, ctx) = work.forward(&x, mode, &mut mask_rng.clone())?;
    if !y.all_finite() {
        return Err(Error::NonFinite(format!(
            "{} forward produced non-finite output",
            layer.kind()
        )));
    }
    let weighting = rng_uniform::<f64>(&mut rng, -1.0, 1.0, y.shape().to_vec())?;
    let dx = work.backward(ctx, &weighting)?;

    let mut max_err = 0.0f64;

    // Input gradient.
    for i in 0..x.len() {
        let numeric = central_difference(|delta| {
            let mut xp = x.clone();
            xp.data_mut()[i] += delta;
            objective(layer, &xp, mode, &mask_rng, &weighting)
        })?;
        max_err = max_err.max(rel_err(dx.data()[i], numeric));
    }

    // Parameter gradients.
    let n_params = layer.params().len();
    for pi in 0..n_params {
        let analytic = work.params()[pi].grad.clone();
        let n_elems = analytic.len();
        for k in 0..n_elems {
            let numeric = central_difference(|delta| {
                let mut perturbed = layer.clone();
                perturbed.params_mut()[pi].value.data_mut()[k] += delta;
                objective(&perturbed, &x, mode, &mask_rng, &weighting)
            })?;
            max_err = max_err.max(rel_err(analytic.data()[k], numeric));
        }
    }

    if !max_err.is_finite() {
        return Err(Error::NonFinite(format!(
            "{} gradcheck produced a non-finite error",
            layer.kind()
        )));
    }
    Ok(max_err)
}

fn objective(
    layer: &Layer<f64>,
    x: &Tensor<f64>,
    mode: Mode,
    mask_rng: &RngStream,
    weighting: &Tensor<f64>,
) -> Result<f64> {
    let mut l = layer.clone();
    let (y, _) = l.forward(x, mode, &mut mask_rng.clone())?;
    Ok(y.iter().zip(weighting.iter()).map(|(&a, &b)| a * b).sum())
}

fn central_difference(mut eval: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let plus = eval(FD_STEP)?;
    let minus = eval(-FD_STEP)?;
    Ok((plus - minus) / (2.0 * FD_STEP))
}

/// Random values with |v| >= 0.05 so ReLU kinks and the finite-difference
/// step never interact.
fn sample_off_kink(rng: &mut RngStream, shape: &[usize]) -> Tensor<f64> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| {
            let mag = 0.05 + rng.next_unit_f64();
            if rng.next_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sample shape")
}
