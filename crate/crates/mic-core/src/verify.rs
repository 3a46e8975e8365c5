//! The gradient-verification suite behind the `gradcheck` command: per-layer
//! finite-difference checks, the fused loss heads, and an end-to-end check
//! of a miniature four-stage model in f64.

use crate::error::{Error, Result};
use crate::layers::{
    gradcheck_layer, BatchNorm, Conv2d, Dense, Dropout, Flatten, GlobalAvgPool, GradCheckReport,
    Layer, MaxPool, Mode, Parameter, Relu,
};
use crate::layers::{rel_err, FD_STEP};
use crate::model::{build_ccnn, ArchitectureSpec, InputShape, Model};
use crate::optim::{binary_ce_loss, l2_penalty, l2_penalty_and_grad, sparse_ce_loss};
use crate::tensor::{rng_uniform, RngStream, Tensor};

/// Every check in the suite must come in at or under this maximum relative
/// error.
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

/// Names understood by `run_gradchecks` / the `--layer` flag.
pub const CHECK_NAMES: &[&str] = &[
    "conv2d",
    "batchnorm",
    "relu",
    "maxpool2d",
    "dropout",
    "global_avg_pool",
    "flatten",
    "dense",
    "softmax_ce",
    "sigmoid_bce",
];

/// Run the named checks (all of `CHECK_NAMES` when `names` is empty), plus
/// the end-to-end model check when `e2e` is set.
pub fn run_gradchecks(names: &[String], e2e: bool) -> Result<Vec<GradCheckReport>> {
    let selected: Vec<&str> = if names.is_empty() {
        CHECK_NAMES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    let mut reports = Vec::new();
    for name in selected {
        let max_rel_err = match name {
            "conv2d" => {
                let layer = Layer::Conv2d(Conv2d::new(
                    uniform_param("k", vec![3, 3, 2, 3], 101),
                    uniform_param("b", vec![3], 102),
                )?);
                gradcheck_layer(&layer, &[1, 6, 6, 2], Mode::Training)?
            }
            "batchnorm" => {
                let mut bn = BatchNorm::<f64>::new(2, "bn");
                bn.gamma.value = uniform_tensor(vec![2], 103, 0.5, 1.5);
                bn.beta.value = uniform_tensor(vec![2], 104, -0.5, 0.5);
                gradcheck_layer(&Layer::BatchNorm(bn), &[4, 3, 3, 2], Mode::Training)?
            }
            "relu" => gradcheck_layer(&Layer::Relu(Relu), &[4, 9], Mode::Training)?,
            "maxpool2d" => {
                gradcheck_layer(&Layer::MaxPool(MaxPool), &[2, 4, 4, 2], Mode::Training)?
            }
            "dropout" => gradcheck_layer(
                &Layer::Dropout(Dropout::new(0.3)?),
                &[4, 10],
                Mode::Training,
            )?,
            "global_avg_pool" => gradcheck_layer(
                &Layer::GlobalAvgPool(GlobalAvgPool),
                &[2, 3, 3, 2],
                Mode::Training,
            )?,
            "flatten" => gradcheck_layer(&Layer::Flatten(Flatten), &[2, 2, 3, 2], Mode::Training)?,
            "dense" => {
                let layer = Layer::Dense(Dense::new(
                    uniform_param("w", vec![5, 4], 105),
                    uniform_param("b", vec![4], 106),
                )?);
                gradcheck_layer(&layer, &[3, 5], Mode::Training)?
            }
            "softmax_ce" => gradcheck_softmax_ce()?,
            "sigmoid_bce" => gradcheck_sigmoid_bce()?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown gradcheck target `{other}`; known: {}",
                    CHECK_NAMES.join(", ")
                )))
            }
        };
        reports.push(GradCheckReport {
            name: name.to_string(),
            max_rel_err,
        });
    }
    if e2e {
        reports.push(GradCheckReport {
            name: "e2e_mini_ccnn".into(),
            max_rel_err: gradcheck_e2e_mini_ccnn()?,
        });
    }
    Ok(reports)
}

/// Finite-difference check of dense -> softmax -> sparse cross-entropy:
/// weights, bias, and input gradients all flow through the fused logit
/// gradient.
pub fn gradcheck_softmax_ce() -> Result<f64> {
    let (n, d, k) = (4, 5, 3);
    let mut rng = RngStream::new(0xFACE, 0);
    let x = rng_uniform::<f64>(&mut rng, -1.0, 1.0, vec![n, d])?;
    let labels = vec![0usize, 2, 1, 2];
    let dense = Dense::new(
        uniform_param("w", vec![d, k], 201),
        uniform_param("b", vec![k], 202),
    )?;

    let loss_of = |dense: &Dense<f64>, x: &Tensor<f64>| -> Result<f64> {
        let (logits, _) = dense.forward(x)?;
        let probs = crate::layers::softmax(&logits)?;
        Ok(sparse_ce_loss(&probs, &labels)?.0)
    };

    // Analytic pass.
    let mut work = dense.clone();
    let (logits, ctx) = work.forward(&x)?;
    let probs = crate::layers::softmax(&logits)?;
    let (_, dlogits) = sparse_ce_loss(&probs, &labels)?;
    let dx = work.backward(ctx, &dlogits)?;

    let mut max_err = 0.0f64;
    for i in 0..x.len() {
        let numeric = central(|delta| {
            let mut xp = x.clone();
            xp.data_mut()[i] += delta;
            loss_of(&dense, &xp)
        })?;
        max_err = max_err.max(rel_err(dx.data()[i], numeric));
    }
    for (pi, analytic) in [&work.weight.grad, &work.bias.grad].into_iter().enumerate() {
        for i in 0..analytic.len() {
            let numeric = central(|delta| {
                let mut d2 = dense.clone();
                let target = if pi == 0 {
                    &mut d2.weight.value
                } else {
                    &mut d2.bias.value
                };
                target.data_mut()[i] += delta;
                loss_of(&d2, &x)
            })?;
            max_err = max_err.max(rel_err(analytic.data()[i], numeric));
        }
    }
    Ok(max_err)
}

/// As above for dense -> sigmoid -> binary cross-entropy.
pub fn gradcheck_sigmoid_bce() -> Result<f64> {
    let (n, d) = (5, 4);
    let mut rng = RngStream::new(0xBEEF, 0);
    let x = rng_uniform::<f64>(&mut rng, -1.0, 1.0, vec![n, d])?;
    let labels = vec![0usize, 1, 1, 0, 1];
    let dense = Dense::new(
        uniform_param("w", vec![d, 1], 203),
        uniform_param("b", vec![1], 204),
    )?;

    let loss_of = |dense: &Dense<f64>, x: &Tensor<f64>| -> Result<f64> {
        let (logit, _) = dense.forward(x)?;
        let p = crate::layers::sigmoid(&logit);
        Ok(binary_ce_loss(&p, &labels)?.0)
    };

    let mut work = dense.clone();
    let (logit, ctx) = work.forward(&x)?;
    let p = crate::layers::sigmoid(&logit);
    let (_, dlogit) = binary_ce_loss(&p, &labels)?;
    let dx = work.backward(ctx, &dlogit)?;

    let mut max_err = 0.0f64;
    for i in 0..x.len() {
        let numeric = central(|delta| {
            let mut xp = x.clone();
            xp.data_mut()[i] += delta;
            loss_of(&dense, &xp)
        })?;
        max_err = max_err.max(rel_err(dx.data()[i], numeric));
    }
    for (pi, analytic) in [&work.weight.grad, &work.bias.grad].into_iter().enumerate() {
        for i in 0..analytic.len() {
            let numeric = central(|delta| {
                let mut d2 = dense.clone();
                let target = if pi == 0 {
                    &mut d2.weight.value
                } else {
                    &mut d2.bias.value
                };
                target.data_mut()[i] += delta;
                loss_of(&d2, &x)
            })?;
            max_err = max_err.max(rel_err(analytic.data()[i], numeric));
        }
    }
    Ok(max_err)
}

/// The miniature architecture used for end-to-end checks: 8x8x1 input, two
/// conv blocks of 2 and 3 filters, a 4-wide dense stage, 3 classes.
pub fn mini_ccnn_spec() -> ArchitectureSpec {
    let mut spec = ArchitectureSpec::ccnn(
        InputShape {
            height: 8,
            width: 8,
            channels: 1,
        },
        3,
    );
    spec.filters = vec![2, 3];
    spec.dense_width = 4;
    spec
}

/// End-to-end check: total loss (sparse CE plus L2 penalty) gradient for
/// every parameter of the mini model against central differences. Batchnorm
/// runs in Training mode on a fixed batch; dropout masks are frozen by
/// replaying one RNG stream.
pub fn gradcheck_e2e_mini_ccnn() -> Result<f64> {
    let spec = mini_ccnn_spec();
    let model = build_ccnn::<f64>(&spec, 19)?;
    // Seed pair chosen so every pre-relu activation and every positive
    // maxpool window gap sits > 7e-3 from a non-smooth point; the
    // finite-difference step never crosses a kink or flips an argmax.
    let mut rng = RngStream::new(20, 0);
    let batch = rng_uniform::<f64>(&mut rng, 0.0, 1.0, vec![4, 8, 8, 1])?;
    let labels = vec![0usize, 1, 2, 1];
    let mask_rng = RngStream::new(0xF07E, 3);

    let loss_of = |model: &Model<f64>| -> Result<f64> {
        let mut m = model.clone();
        let (probs, _) = m.forward(&batch, Mode::Training, &mut mask_rng.clone())?;
        let (data_loss, _) = sparse_ce_loss(&probs, &labels)?;
        Ok(data_loss + l2_penalty(&m))
    };

    // Analytic gradients.
    let mut work = model.clone();
    work.zero_grads();
    let (probs, ctxs) = work.forward(&batch, Mode::Training, &mut mask_rng.clone())?;
    let (_, dlogits) = sparse_ce_loss(&probs, &labels)?;
    work.backward(ctxs, &dlogits)?;
    l2_penalty_and_grad(&mut work);

    // The conv biases are exactly canceled by the following batchnorm, so
    // their true gradient is zero while the central difference carries
    // rounding noise of order eps * loss / step (~1e-11). A denominator
    // floor of 1e-6 keeps that noise from dominating the ratio without
    // loosening the check anywhere a real gradient exists.
    let e2e_rel = |a: f64, n: f64| (a - n).abs() / (1e-6f64).max(a.abs() + n.abs());

    let mut max_err = 0.0f64;
    let n_params = model.params().len();
    for pi in 0..n_params {
        let analytic = work.params()[pi].grad.clone();
        for i in 0..analytic.len() {
            let numeric = central(|delta| {
                let mut m = model.clone();
                m.params_mut()[pi].value.data_mut()[i] += delta;
                loss_of(&m)
            })?;
            max_err = max_err.max(e2e_rel(analytic.data()[i], numeric));
        }
    }
    if !max_err.is_finite() {
        return Err(Error::NonFinite(
            "e2e gradcheck produced a non-finite error".into(),
        ));
    }
    Ok(max_err)
}

fn central(mut eval: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let plus = eval(FD_STEP)?;
    let minus = eval(-FD_STEP)?;
    Ok((plus - minus) / (2.0 * FD_STEP))
}

fn uniform_param(name: &str, shape: Vec<usize>, seed: u64) -> Parameter<f64> {
    Parameter::new(name, uniform_tensor(shape, seed, -0.7, 0.7), 0.0)
}

fn uniform_tensor(shape: Vec<usize>, seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut rng = RngStream::new(seed, 11);
    rng_uniform::<f64>(&mut rng, lo, hi, shape).expect("uniform tensor")
}
