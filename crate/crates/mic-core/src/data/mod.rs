//! Dataset ingestion and the deterministic image pipeline: directory
//! scanning, decoding, resizing, rescaling, augmentation, stratified
//! splitting, batching with bounded prefetch, and a synthetic dataset
//! generator for desk-scale runs.

mod augment;
mod batch;
mod decode;
mod resize;
mod scan;
mod split;
mod synth;

pub use augment::{augment_sample, sample_draws, AugmentDraws};
pub use batch::{Batch, BatchIter, DataSource};
pub use decode::{decode_image, encode_pgm, to_channels};
pub use resize::{rescale, resize_bilinear};
pub use scan::{scan_dataset_dir, DatasetScan};
pub use split::split_train_val;
pub use synth::{gen_synthetic, SynthManifest, SYNTH_CLASS_NAMES};

use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One labeled image: either a file on disk or in-memory pixels (u8-valued
/// floats, `[h, w, c]`).
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub source: SampleSource,
    pub class_index: usize,
    pub class_name: String,
}

#[derive(Debug, Clone)]
pub enum SampleSource {
    Path(PathBuf),
    Pixels(Arc<Tensor<f32>>),
}

/// Pipeline knobs; the defaults mirror the training setup this engine
/// reproduces (180x180 RGB, batches of 32, 20% validation, flips plus
/// rotations up to 5% of a full turn and 10% zoom).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub image_size: usize,
    pub channels: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub augment: bool,
    pub rotation_limit_deg: f64,
    pub zoom_limit: f64,
    pub flip_prob: f64,
    pub prefetch_depth: usize,
    pub seed: u64,
    /// Abort on a decode failure (default) instead of skipping with a
    /// warning.
    pub strict_decode: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            image_size: 180,
            channels: 3,
            batch_size: 32,
            val_fraction: 0.2,
            augment: true,
            rotation_limit_deg: 0.05 * 360.0,
            zoom_limit: 0.10,
            flip_prob: 0.5,
            prefetch_depth: 2,
            seed: 0,
            strict_decode: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 {
            return Err(Error::invalid("image_size must be >= 1"));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::invalid(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "val_fraction must be in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.rotation_limit_deg < 0.0 || self.zoom_limit < 0.0 {
            return Err(Error::invalid("augmentation limits must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::invalid("flip_prob must be in [0, 1]"));
        }
        Ok(())
    }
}
