//! Model construction from declarative architecture specs, full-model
//! forward/backward, and the parameter registry that fixes serialization
//! order.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, LoadedCheckpoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    softmax, BatchNorm, Conv2d, Dense, Dropout, Flatten, GlobalAvgPool, Layer, LayerContext,
    MaxPool, Mode, Parameter, Relu,
};
use crate::tensor::{rng_uniform, Float, RngStream, Tensor};

pub(crate) mod streams {
    //! Purpose tags folded into derived RNG stream ids so independent
    //! consumers (init, shuffling, augmentation, ...) never collide.
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const SYNTH: u64 = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchId {
    Ccnn,
    Cnn,
}

impl ArchId {
    pub fn name(self) -> &'static str {
        match self {
            ArchId::Ccnn => "ccnn",
            ArchId::Cnn => "cnn",
        }
    }
}

impl std::str::FromStr for ArchId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ccnn" => Ok(ArchId::Ccnn),
            "cnn" => Ok(ArchId::Cnn),
            other => Err(Error::invalid(format!(
                "unknown architecture `{other}` (expected `ccnn` or `cnn`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// Declarative description of a model, sufficient to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub arch: ArchId,
    pub input: InputShape,
    pub num_classes: usize,
    pub filters: Vec<usize>,
    pub block_dropout: f64,
    pub head_dropout: f64,
    pub l2: f64,
    pub dense_width: usize,
}

impl ArchitectureSpec {
    /// Four conv blocks with batchnorm, heavier dropout, and L2 on kernels.
    pub fn ccnn(input: InputShape, num_classes: usize) -> Self {
        Self {
            arch: ArchId::Ccnn,
            input,
            num_classes,
            filters: vec![32, 64, 128, 256],
            block_dropout: 0.3,
            head_dropout: 0.5,
            l2: 0.01,
            dense_width: 256,
        }
    }

    /// Plain three-block baseline: no batchnorm, no L2, flatten head.
    pub fn cnn(input: InputShape, num_classes: usize) -> Self {
        Self {
            arch: ArchId::Cnn,
            input,
            num_classes,
            filters: vec![32, 64, 128],
            block_dropout: 0.25,
            head_dropout: 0.5,
            l2: 0.0,
            dense_width: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be >= 2"));
        }
        if self.filters.is_empty() {
            return Err(Error::invalid("filter sequence must not be empty"));
        }
        if self.filters.contains(&0) {
            return Err(Error::invalid("filter counts must be >= 1"));
        }
        if self.input.height == 0 || self.input.width == 0 || self.input.channels == 0 {
            return Err(Error::invalid("input dimensions must be >= 1"));
        }
        for (name, rate) in [
            ("block_dropout", self.block_dropout),
            ("head_dropout", self.head_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::invalid(format!(
                    "{name} must be in [0, 1), got {rate}"
                )));
            }
        }
        if self.l2 < 0.0 {
            return Err(Error::invalid("l2 coefficient must be >= 0"));
        }
        if self.dense_width == 0 {
            return Err(Error::invalid("dense_width must be >= 1"));
        }
        Ok(())
    }

    /// Output units: a single sigmoid unit for two classes, otherwise one
    /// softmax unit per class.
    pub fn head_units(&self) -> usize {
        if self.num_classes == 2 {
            1
        } else {
            self.num_classes
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadActivation {
    Softmax,
    Sigmoid,
}

/// An ordered layer stack plus its head activation. The parameter registry
/// is the layer order with kernels before biases and gamma before beta; it
/// defines the checkpoint serialization order.
#[derive(Debug, Clone)]
pub struct Model<E: Float = f32> {
    pub spec: ArchitectureSpec,
    pub layers: Vec<Layer<E>>,
    pub head: HeadActivation,
}

/// Bitwise snapshot of everything that determines predictions: parameter
/// values and batchnorm running statistics.
#[derive(Debug, Clone)]
pub struct ModelState<E: Float = f32> {
    params: Vec<Tensor<E>>,
    running: Vec<(Tensor<E>, Tensor<E>)>,
}

impl<E: Float> ModelState<E> {
    pub fn iter_params(&self) -> impl Iterator<Item = &Tensor<E>> {
        self.params.iter()
    }
}

pub fn build_ccnn<E: Float>(spec: &ArchitectureSpec, seed: u64) -> Result<Model<E>> {
    if spec.arch != ArchId::Ccnn {
        return Err(Error::invalid("build_ccnn requires arch == ccnn"));
    }
    spec.validate()?;
    let mut init = Initializer::new(seed);
    let mut layers: Vec<Layer<E>> = Vec::new();
    let (mut h, mut w) = (spec.input.height, spec.input.width);
    let mut cin = spec.input.channels;

    for (i, &f) in spec.filters.iter().enumerate() {
        let block = i + 1;
        layers.push(Layer::Conv2d(init.conv(
            &format!("block{block}.conv"),
            cin,
            f,
            spec.l2,
        )?));
        layers.push(Layer::BatchNorm(BatchNorm::new(
            f,
            &format!("block{block}.bn"),
        )));
        layers.push(Layer::Relu(Relu));
        if h < 2 || w < 2 {
            return Err(Error::invalid(format!(
                "ccnn block {block} (filters {f}): maxpool needs spatial dims >= 2x2, \
                 have {h}x{w} from input {}x{}",
                spec.input.height, spec.input.width
            )));
        }
        layers.push(Layer::MaxPool(MaxPool));
        h /= 2;
        w /= 2;
        layers.push(Layer::Dropout(Dropout::new(spec.block_dropout)?));
        cin = f;
    }

    layers.push(Layer::GlobalAvgPool(GlobalAvgPool));
    layers.push(Layer::Dense(init.dense(
        "head.dense",
        cin,
        spec.dense_width,
        spec.l2,
    )?));
    layers.push(Layer::Relu(Relu));
    layers.push(Layer::Dropout(Dropout::new(spec.head_dropout)?));
    layers.push(Layer::Dense(init.dense(
        "head.out",
        spec.dense_width,
        spec.head_units(),
        0.0,
    )?));

    Ok(Model {
        spec: spec.clone(),
        layers,
        head: head_activation(spec),
    })
}

pub fn build_cnn_baseline<E: Float>(spec: &ArchitectureSpec, seed: u64) -> Result<Model<E>> {
    if spec.arch != ArchId::Cnn {
        return Err(Error::invalid("build_cnn_baseline requires arch == cnn"));
    }
    spec.validate()?;
    let mut init = Initializer::new(seed);
    let mut layers: Vec<Layer<E>> = Vec::new();
    let (mut h, mut w) = (spec.input.height, spec.input.width);
    let mut cin = spec.input.channels;

    for (i, &f) in spec.filters.iter().enumerate() {
        let block = i + 1;
        layers.push(Layer::Conv2d(init.conv(
            &format!("block{block}.conv"),
            cin,
            f,
            0.0,
        )?));
        layers.push(Layer::Relu(Relu));
        if h < 2 || w < 2 {
            return Err(Error::invalid(format!(
                "cnn block {block} (filters {f}): maxpool needs spatial dims >= 2x2, \
                 have {h}x{w} from input {}x{}",
                spec.input.height, spec.input.width
            )));
        }
        layers.push(Layer::MaxPool(MaxPool));
        h /= 2;
        w /= 2;
        layers.push(Layer::Dropout(Dropout::new(spec.block_dropout)?));
        cin = f;
    }

    layers.push(Layer::Flatten(Flatten));
    let flat = h * w * cin;
    layers.push(Layer::Dense(init.dense(
        "head.dense",
        flat,
        spec.dense_width,
        0.0,
    )?));
    layers.push(Layer::Relu(Relu));
    layers.push(Layer::Dropout(Dropout::new(spec.head_dropout)?));
    layers.push(Layer::Dense(init.dense(
        "head.out",
        spec.dense_width,
        spec.head_units(),
        0.0,
    )?));

    Ok(Model {
        spec: spec.clone(),
        layers,
        head: head_activation(spec),
    })
}

/// Build whichever architecture the spec names.
pub fn build_model<E: Float>(spec: &ArchitectureSpec, seed: u64) -> Result<Model<E>> {
    match spec.arch {
        ArchId::Ccnn => build_ccnn(spec, seed),
        ArchId::Cnn => build_cnn_baseline(spec, seed),
    }
}

fn head_activation(spec: &ArchitectureSpec) -> HeadActivation {
    if spec.num_classes == 2 {
        HeadActivation::Sigmoid
    } else {
        HeadActivation::Softmax
    }
}

/// Glorot-uniform initialization with one derived stream per parameter, so
/// the weights depend only on (seed, parameter ordinal).
struct Initializer {
    seed: u64,
    ordinal: u64,
}

impl Initializer {
    pub const SCHEME: &'static str = "glorot-uniform";

    fn new(seed: u64) -> Self {
        Self { seed, ordinal: 0 }
    }

    fn glorot<E: Float>(
        &mut self,
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<Tensor<E>> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = RngStream::derive(self.seed, &[streams::INIT, self.ordinal]);
        self.ordinal += 1;
        rng_uniform(&mut rng, E::from_f64(-limit), E::from_f64(limit), shape)
    }

    fn conv<E: Float>(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        l2: f64,
    ) -> Result<Conv2d<E>> {
        let kernel = self.glorot(vec![3, 3, cin, cout], 9 * cin, 9 * cout)?;
        Conv2d::new(
            Parameter::new(format!("{name}.kernel"), kernel, l2),
            Parameter::new(format!("{name}.bias"), Tensor::zeros(vec![cout]), 0.0),
        )
    }

    fn dense<E: Float>(
        &mut self,
        name: &str,
        din: usize,
        dout: usize,
        l2: f64,
    ) -> Result<Dense<E>> {
        let weight = self.glorot(vec![din, dout], din, dout)?;
        Dense::new(
            Parameter::new(format!("{name}.weight"), weight, l2),
            Parameter::new(format!("{name}.bias"), Tensor::zeros(vec![dout]), 0.0),
        )
    }
}

pub(crate) const WEIGHT_INIT_SCHEME: &str = Initializer::SCHEME;

impl<E: Float> Model<E> {
    /// Run the full stack and the head activation. Training mode returns the
    /// per-layer contexts needed by [`Model::backward`].
    pub fn forward(
        &mut self,
        batch: &Tensor<E>,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(Tensor<E>, Vec<LayerContext<E>>)> {
        self.check_input(batch)?;
        let mut ctxs = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &mut self.layers {
            let (y, ctx) = layer.forward(&x, mode, rng)?;
            ctxs.push(ctx);
            x = y;
        }
        let probs = match self.head {
            HeadActivation::Softmax => softmax(&x)?,
            HeadActivation::Sigmoid => crate::layers::sigmoid(&x),
        };
        Ok((probs, ctxs))
    }

    /// Inference-only forward; contexts are dropped.
    pub fn predict(&mut self, batch: &Tensor<E>) -> Result<Tensor<E>> {
        let mut rng = RngStream::new(0, 0); // unused in inference
        Ok(self.forward(batch, Mode::Inference, &mut rng)?.0)
    }

    /// Backpropagate from the fused loss gradient with respect to the head
    /// logits; accumulates parameter gradients and returns the input
    /// gradient.
    pub fn backward(
        &mut self,
        ctxs: Vec<LayerContext<E>>,
        dlogits: &Tensor<E>,
    ) -> Result<Tensor<E>> {
        if ctxs.len() != self.layers.len() {
            return Err(Error::invalid(format!(
                "backward got {} contexts for {} layers",
                ctxs.len(),
                self.layers.len()
            )));
        }
        let mut grad = dlogits.clone();
        for (layer, ctx) in self.layers.iter_mut().zip(ctxs).rev() {
            grad = layer.backward(ctx, &grad)?;
        }
        Ok(grad)
    }

    fn check_input(&self, batch: &Tensor<E>) -> Result<()> {
        let s = self.spec.input;
        match batch.shape() {
            [_, h, w, c] if *h == s.height && *w == s.width && *c == s.channels => {}
            got => {
                return Err(Error::shape(
                    "model forward",
                    format!(
                        "batch {got:?} does not match spec input [n, {}, {}, {}]",
                        s.height, s.width, s.channels
                    ),
                ))
            }
        }
        for &v in batch.iter() {
            if !(v >= E::ZERO && v <= E::ONE) {
                return Err(Error::invalid(format!(
                    "model input values must lie in [0, 1]; found {v}"
                )));
            }
        }
        Ok(())
    }

    /// Trainable parameters in registry order.
    pub fn params(&self) -> Vec<&Parameter<E>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<E>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    /// Total trainable parameter elements.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn batchnorms(&self) -> Vec<&BatchNorm<E>> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::BatchNorm(bn) => Some(bn),
                _ => None,
            })
            .collect()
    }

    pub fn batchnorms_mut(&mut self) -> Vec<&mut BatchNorm<E>> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                Layer::BatchNorm(bn) => Some(bn),
                _ => None,
            })
            .collect()
    }

    pub fn capture_state(&self) -> ModelState<E> {
        ModelState {
            params: self.params().iter().map(|p| p.value.clone()).collect(),
            running: self
                .batchnorms()
                .iter()
                .map(|bn| (bn.running_mean.clone(), bn.running_var.clone()))
                .collect(),
        }
    }

    pub fn restore_state(&mut self, state: &ModelState<E>) {
        for (p, v) in self.params_mut().into_iter().zip(&state.params) {
            p.value = v.clone();
        }
        for (bn, (mean, var)) in self.batchnorms_mut().into_iter().zip(&state.running) {
            bn.running_mean = mean.clone();
            bn.running_var = var.clone();
        }
    }
}

/// Hard class decisions from head probabilities: argmax per row for softmax
/// (first maximum on ties), threshold 0.5 for the single sigmoid unit.
pub fn predicted_classes<E: Float>(probs: &Tensor<E>, head: HeadActivation) -> Vec<usize> {
    let cols = probs.shape()[1];
    probs
        .data()
        .chunks(cols)
        .map(|row| match head {
            HeadActivation::Sigmoid => usize::from(row[0].to_f64() >= 0.5),
            HeadActivation::Softmax => {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_input(h: usize, w: usize, c: usize) -> InputShape {
        InputShape {
            height: h,
            width: w,
            channels: c,
        }
    }

    fn mini_ccnn_spec() -> ArchitectureSpec {
        let mut spec = ArchitectureSpec::ccnn(small_input(8, 8, 1), 3);
        spec.filters = vec![2, 3];
        spec.dense_width = 4;
        spec
    }

    #[test]
    fn ccnn_default_layer_census() {
        let spec = ArchitectureSpec::ccnn(small_input(180, 180, 3), 3);
        let model = build_ccnn::<f32>(&spec, 0).unwrap();
        let count = |kind: &str| model.layers.iter().filter(|l| l.kind() == kind).count();
        assert_eq!(count("conv2d"), 4);
        assert_eq!(count("batchnorm"), 4);
        assert_eq!(count("maxpool2d"), 4);
        assert_eq!(count("dropout"), 5);
        assert_eq!(count("global_avg_pool"), 1);
        assert_eq!(count("dense"), 2);
        let filters: Vec<usize> = model
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv2d(c) => Some(c.cout()),
                _ => None,
            })
            .collect();
        assert_eq!(filters, vec![32, 64, 128, 256]);
    }

    #[test]
    fn ccnn_forward_probabilities_sum_to_one() {
        let mut spec = ArchitectureSpec::ccnn(small_input(16, 16, 3), 3);
        spec.filters = vec![4, 8];
        let mut model = build_ccnn::<f32>(&spec, 7).unwrap();
        let mut rng = RngStream::new(1, 0);
        let x = rng_uniform::<f32>(&mut rng, 0.0, 1.0, vec![2, 16, 16, 3]).unwrap();
        let probs = model.predict(&x).unwrap();
        assert_eq!(probs.shape(), &[2, 3]);
        for row in probs.data().chunks(3) {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "row sum {sum}");
        }
    }

    #[test]
    fn too_small_input_names_failing_stage() {
        let spec = ArchitectureSpec::ccnn(small_input(8, 8, 1), 3); // 4 pools need >= 16
        let err = build_ccnn::<f32>(&spec, 0).unwrap_err().to_string();
        assert!(err.contains("block 4"), "{err}");
        assert!(err.contains("maxpool"), "{err}");
    }

    #[test]
    fn cnn_flatten_width_from_180() {
        let spec = ArchitectureSpec::cnn(small_input(180, 180, 3), 3);
        let model = build_cnn_baseline::<f32>(&spec, 0).unwrap();
        // 180 -> 90 -> 45 -> 22 spatial, 128 channels.
        let dense = model
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d),
                _ => None,
            })
            .unwrap();
        assert_eq!(dense.din(), 22 * 22 * 128);
        assert_eq!(dense.din(), 61952);
    }

    #[test]
    fn binary_head_is_single_sigmoid_unit() {
        let mut spec = ArchitectureSpec::cnn(small_input(16, 16, 1), 2);
        spec.filters = vec![2, 3];
        let mut model = build_cnn_baseline::<f32>(&spec, 3).unwrap();
        assert_eq!(model.head, HeadActivation::Sigmoid);
        let x = Tensor::full(vec![1, 16, 16, 1], 0.5f32);
        let p = model.predict(&x).unwrap();
        assert_eq!(p.shape(), &[1, 1]);
        let v = p.data()[0];
        assert!(v > 0.0 && v < 1.0, "sigmoid output {v}");
    }

    #[test]
    fn zero_image_yields_uniform_softmax() {
        // Zero input stays zero through conv (zero bias), so the head sees a
        // zero vector and softmax is exactly uniform.
        let mut spec = ArchitectureSpec::cnn(small_input(12, 12, 1), 3);
        spec.filters = vec![2, 3];
        let mut model = build_cnn_baseline::<f32>(&spec, 11).unwrap();
        let x = Tensor::<f32>::zeros(vec![1, 12, 12, 1]);
        let p = model.predict(&x).unwrap();
        assert!(p.all_finite());
        for &v in p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn inference_is_deterministic_and_per_sample_independent() {
        let spec = mini_ccnn_spec();
        let mut model = build_ccnn::<f32>(&spec, 21).unwrap();
        let mut rng = RngStream::new(2, 0);
        let x = rng_uniform::<f32>(&mut rng, 0.0, 1.0, vec![1, 8, 8, 1]).unwrap();
        let p1 = model.predict(&x).unwrap();
        let p2 = model.predict(&x).unwrap();
        assert_eq!(p1, p2);

        // Duplicate the sample into a batch of 3; each row equals the
        // single-sample output bitwise (inference batchnorm does not couple
        // samples).
        let mut batch_data = Vec::new();
        for _ in 0..3 {
            batch_data.extend_from_slice(x.data());
        }
        let batch = Tensor::new(vec![3, 8, 8, 1], batch_data).unwrap();
        let pb = model.predict(&batch).unwrap();
        for row in pb.data().chunks(3) {
            assert_eq!(row, p1.data());
        }
    }

    #[test]
    fn forward_rejects_out_of_range_and_wrong_shape() {
        let spec = mini_ccnn_spec();
        let mut model = build_ccnn::<f32>(&spec, 0).unwrap();
        let bad_range = Tensor::full(vec![1, 8, 8, 1], 1.5f32);
        assert!(model.predict(&bad_range).is_err());
        let bad_shape = Tensor::full(vec![1, 8, 4, 1], 0.5f32);
        assert!(model.predict(&bad_shape).is_err());
    }

    #[test]
    fn finite_outputs_for_fresh_weights() {
        let spec = mini_ccnn_spec();
        let mut model = build_ccnn::<f32>(&spec, 33).unwrap();
        let mut rng = RngStream::new(5, 0);
        let x = rng_uniform::<f32>(&mut rng, 0.0, 1.0, vec![4, 8, 8, 1]).unwrap();
        let p = model.predict(&x).unwrap();
        assert!(p.all_finite());
    }

    #[test]
    fn param_count_small_fixtures() {
        // dense 2 -> 3: weights 6 + bias 3.
        let d = Dense::<f32>::new(
            Parameter::new("w", Tensor::zeros(vec![2, 3]), 0.0),
            Parameter::new("b", Tensor::zeros(vec![3]), 0.0),
        )
        .unwrap();
        let m = Model {
            spec: mini_ccnn_spec(),
            layers: vec![Layer::Dense(d)],
            head: HeadActivation::Softmax,
        };
        assert_eq!(m.param_count(), 9);

        let c = Conv2d::<f32>::new(
            Parameter::new("k", Tensor::zeros(vec![3, 3, 1, 1]), 0.0),
            Parameter::new("b", Tensor::zeros(vec![1]), 0.0),
        )
        .unwrap();
        let m = Model {
            spec: mini_ccnn_spec(),
            layers: vec![Layer::Conv2d(c)],
            head: HeadActivation::Softmax,
        };
        assert_eq!(m.param_count(), 10);
    }

    #[test]
    fn registry_order_is_stable_kernels_before_biases() {
        let model = build_ccnn::<f32>(&mini_ccnn_spec(), 0).unwrap();
        let names: Vec<&str> = model.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "block1.conv.kernel",
                "block1.conv.bias",
                "block1.bn.gamma",
                "block1.bn.beta",
                "block2.conv.kernel",
                "block2.conv.bias",
                "block2.bn.gamma",
                "block2.bn.beta",
                "head.dense.weight",
                "head.dense.bias",
                "head.out.weight",
                "head.out.bias",
            ]
        );
    }

    #[test]
    fn l2_applies_to_kernels_only() {
        let model = build_ccnn::<f32>(&mini_ccnn_spec(), 0).unwrap();
        for p in model.params() {
            let is_kernel = p.name.ends_with(".kernel") || p.name == "head.dense.weight";
            let expected = if is_kernel { 0.01 } else { 0.0 };
            assert_eq!(p.l2_coeff, expected, "{}", p.name);
        }
    }

    #[test]
    fn capture_restore_round_trip_is_bitwise() {
        let spec = mini_ccnn_spec();
        let mut model = build_ccnn::<f32>(&spec, 9).unwrap();
        let state = model.capture_state();
        // Perturb everything, then restore.
        for p in model.params_mut() {
            for v in p.value.data_mut() {
                *v += 1.0;
            }
        }
        for bn in model.batchnorms_mut() {
            for v in bn.running_mean.data_mut() {
                *v += 2.0;
            }
        }
        model.restore_state(&state);
        let again = model.capture_state();
        for (a, b) in state.params.iter().zip(&again.params) {
            assert_eq!(a, b);
        }
        for (a, b) in state.running.iter().zip(&again.running) {
            assert_eq!(a, b);
        }
    }
}
