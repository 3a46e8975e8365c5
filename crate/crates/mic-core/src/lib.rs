//! A self-contained CNN training engine on the CPU.
//!
//! Everything is implemented from first principles: dense tensors, layer
//! forward/backward passes with analytic gradients, Adam with a step-decay
//! schedule, a deterministic image pipeline (decode, resize, augment, batch,
//! prefetch), and checkpoint/history serialization. No autograd framework,
//! no BLAS.
//!
//! With the `parallel` feature (on by default) the hot kernels distribute
//! disjoint output rows across a rayon pool. Every parallel loop computes
//! each output element with the same sequential reduction order as the
//! scalar path, so results are bitwise identical with the feature on or
//! off, at any thread count.

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod verify;

pub use error::{CheckpointError, Error, Result};
pub use tensor::{RngStream, Tensor};
