//! Layer forward/backward passes with hand-derived analytic gradients.
//!
//! Every layer follows the same protocol: `forward` returns the output plus a
//! [`LayerContext`] holding whatever intermediates the backward pass needs;
//! `backward` consumes that context, accumulates parameter gradients in
//! place, and returns the gradient with respect to the layer input.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod gradcheck;
mod pool;

pub use activation::{sigmoid, softmax, Relu};
pub use batchnorm::BatchNorm;
pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use gradcheck::{gradcheck_layer, GradCheckReport};
pub(crate) use gradcheck::{rel_err, FD_STEP};
pub use pool::{GlobalAvgPool, MaxPool};

use crate::error::Result;
use crate::tensor::{Float, RngStream, Tensor};

/// Training enables dropout, augmentation, and batch statistics; inference
/// uses running statistics and applies no randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// A trainable tensor with its gradient accumulator, L2 coefficient, and
/// Adam moment state. All four tensors share one shape.
#[derive(Debug, Clone)]
pub struct Parameter<E: Float = f32> {
    pub name: String,
    pub value: Tensor<E>,
    pub grad: Tensor<E>,
    pub l2_coeff: f64,
    pub adam_m: Tensor<E>,
    pub adam_v: Tensor<E>,
}

impl<E: Float> Parameter<E> {
    pub fn new(name: impl Into<String>, value: Tensor<E>, l2_coeff: f64) -> Self {
        let shape = value.shape().to_vec();
        Self {
            name: name.into(),
            grad: Tensor::zeros(shape.clone()),
            adam_m: Tensor::zeros(shape.clone()),
            adam_v: Tensor::zeros(shape),
            value,
            l2_coeff,
        }
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.data_mut() {
            *g = E::ZERO;
        }
    }
}

/// Cached forward intermediates, consumed by the matching `backward` call.
#[derive(Debug)]
pub enum LayerContext<E: Float = f32> {
    Conv2d {
        cols: Tensor<E>,
        in_shape: [usize; 4],
    },
    BatchNorm {
        xhat: Tensor<E>,
        inv_std: Vec<E>,
    },
    Relu {
        active: Vec<bool>,
    },
    MaxPool {
        argmax: Vec<u32>,
        in_shape: [usize; 4],
    },
    /// Mask already scaled by 1/(1-rate); `None` when the layer was a no-op
    /// (inference mode or rate 0).
    Dropout {
        scaled_mask: Option<Tensor<E>>,
    },
    GlobalAvgPool {
        in_shape: [usize; 4],
    },
    Flatten {
        in_shape: Vec<usize>,
    },
    Dense {
        input: Tensor<E>,
    },
}

/// One stage of a model. An enum rather than a trait object so the whole
/// stack stays generic over the element type.
#[derive(Debug, Clone)]
pub enum Layer<E: Float = f32> {
    Conv2d(Conv2d<E>),
    BatchNorm(BatchNorm<E>),
    Relu(Relu),
    MaxPool(MaxPool),
    Dropout(Dropout),
    GlobalAvgPool(GlobalAvgPool),
    Flatten(Flatten),
    Dense(Dense<E>),
}

impl<E: Float> Layer<E> {
    pub fn forward(
        &mut self,
        x: &Tensor<E>,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(Tensor<E>, LayerContext<E>)> {
        match self {
            Layer::Conv2d(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x),
            Layer::MaxPool(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, mode, rng),
            Layer::GlobalAvgPool(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        match (self, ctx) {
            (Layer::Conv2d(l), ctx @ LayerContext::Conv2d { .. }) => l.backward(ctx, dy),
            (Layer::BatchNorm(l), ctx @ LayerContext::BatchNorm { .. }) => l.backward(ctx, dy),
            (Layer::Relu(l), ctx @ LayerContext::Relu { .. }) => l.backward(ctx, dy),
            (Layer::MaxPool(l), ctx @ LayerContext::MaxPool { .. }) => l.backward(ctx, dy),
            (Layer::Dropout(l), ctx @ LayerContext::Dropout { .. }) => l.backward(ctx, dy),
            (Layer::GlobalAvgPool(l), ctx @ LayerContext::GlobalAvgPool { .. }) => {
                l.backward(ctx, dy)
            }
            (Layer::Flatten(l), ctx @ LayerContext::Flatten { .. }) => l.backward(ctx, dy),
            (Layer::Dense(l), ctx @ LayerContext::Dense { .. }) => l.backward(ctx, dy),
            (layer, _) => Err(crate::error::Error::invalid(format!(
                "backward called with a context from a different layer kind ({})",
                layer.kind()
            ))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "maxpool2d",
            Layer::Dropout(_) => "dropout",
            Layer::GlobalAvgPool(_) => "global_avg_pool",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
        }
    }

    /// Trainable parameters in serialization order (kernels before biases,
    /// gamma before beta).
    pub fn params(&self) -> Vec<&Parameter<E>> {
        match self {
            Layer::Conv2d(l) => vec![&l.kernel, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<E>> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.kernel, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }
}

pub(crate) fn nhwc<E: Float>(x: &Tensor<E>, op: &'static str) -> Result<[usize; 4]> {
    match x.shape() {
        [n, h, w, c] => Ok([*n, *h, *w, *c]),
        s => Err(crate::error::Error::shape(
            op,
            format!("expected NHWC tensor, got {s:?}"),
        )),
    }
}
