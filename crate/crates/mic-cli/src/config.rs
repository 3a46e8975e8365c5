//! Run configuration: a JSON document mirroring the training, pipeline, and
//! architecture knobs plus paths. Every field is optional; CLI flags
//! override file values and the fully resolved merge is what `run.json`
//! records, so a run can be reproduced by feeding its manifest back in.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use mic_core::data::PipelineConfig;
use mic_core::model::{ArchId, ArchitectureSpec, InputShape};
use mic_core::optim::TrainConfig;
use mic_core::tensor::RNG_GENERATOR_ID;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // Architecture.
    pub arch: Option<String>,
    pub size: Option<usize>,
    pub channels: Option<usize>,
    pub num_classes: Option<usize>,
    pub filters: Option<Vec<usize>>,
    pub block_dropout: Option<f64>,
    pub head_dropout: Option<f64>,
    pub l2: Option<f64>,
    pub dense_width: Option<usize>,
    // Training.
    pub epochs: Option<u32>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lr_decay_factor: Option<f64>,
    pub lr_decay_every: Option<u32>,
    pub patience: Option<u32>,
    pub min_delta: Option<f64>,
    pub seed: Option<u64>,
    pub deterministic: Option<bool>,
    // Pipeline.
    pub val_fraction: Option<f64>,
    pub augment: Option<bool>,
    pub prefetch: Option<usize>,
    // Paths.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    // Provenance.
    pub rng_generator: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::Runtime)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(generator) = &cfg.rng_generator {
            if generator != RNG_GENERATOR_ID {
                return Err(CliError::Usage(format!(
                    "config requires rng generator `{generator}`, this build provides `{RNG_GENERATOR_ID}`"
                )));
            }
        }
        Ok(cfg)
    }

    /// Overlay `other` on top of `self`: present fields win.
    pub fn overlaid(mut self, other: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($field:ident),+ $(,)?) => {
                $(if other.$field.is_some() { self.$field = other.$field; })+
            };
        }
        take!(
            arch,
            size,
            channels,
            num_classes,
            filters,
            block_dropout,
            head_dropout,
            l2,
            dense_width,
            epochs,
            batch_size,
            lr,
            lr_decay_factor,
            lr_decay_every,
            patience,
            min_delta,
            seed,
            deterministic,
            val_fraction,
            augment,
            prefetch,
            data,
            out,
            checkpoint,
            rng_generator,
        );
        self
    }

    /// Resolve against module defaults into concrete configs. `num_classes`
    /// comes from the scanned dataset; a configured value must agree.
    pub fn resolve(&self, num_classes: usize) -> anyhow::Result<ResolvedRun> {
        if let Some(k) = self.num_classes {
            if k != num_classes {
                bail!("config says num_classes = {k}, but the dataset has {num_classes} classes");
            }
        }
        let arch: ArchId = self
            .arch
            .as_deref()
            .unwrap_or("ccnn")
            .parse()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let size = self.size.unwrap_or(180);
        let channels = self.channels.unwrap_or(3);
        let input = InputShape {
            height: size,
            width: size,
            channels,
        };
        let mut spec = match arch {
            ArchId::Ccnn => ArchitectureSpec::ccnn(input, num_classes),
            ArchId::Cnn => ArchitectureSpec::cnn(input, num_classes),
        };
        if let Some(filters) = &self.filters {
            spec.filters = filters.clone();
        }
        if let Some(v) = self.block_dropout {
            spec.block_dropout = v;
        }
        if let Some(v) = self.head_dropout {
            spec.head_dropout = v;
        }
        if let Some(v) = self.l2 {
            spec.l2 = v;
        }
        if let Some(v) = self.dense_width {
            spec.dense_width = v;
        }
        spec.validate()?;

        let defaults = TrainConfig::default();
        let train = TrainConfig {
            max_epochs: self.epochs.unwrap_or(defaults.max_epochs),
            batch_size: self.batch_size.unwrap_or(defaults.batch_size),
            base_lr: self.lr.unwrap_or(defaults.base_lr),
            lr_decay_factor: self.lr_decay_factor.unwrap_or(defaults.lr_decay_factor),
            lr_decay_every: self.lr_decay_every.unwrap_or(defaults.lr_decay_every),
            patience: self.patience.unwrap_or(defaults.patience),
            min_delta: self.min_delta.unwrap_or(defaults.min_delta),
            seed: self.seed.unwrap_or(defaults.seed),
            deterministic: self.deterministic.unwrap_or(defaults.deterministic),
        };
        train.validate()?;

        let pdefaults = PipelineConfig::default();
        let pipeline = PipelineConfig {
            image_size: size,
            channels,
            batch_size: train.batch_size,
            val_fraction: self.val_fraction.unwrap_or(pdefaults.val_fraction),
            augment: self.augment.unwrap_or(pdefaults.augment),
            prefetch_depth: self.prefetch.unwrap_or(pdefaults.prefetch_depth),
            seed: train.seed,
            ..pdefaults
        };
        pipeline.validate()?;

        Ok(ResolvedRun {
            spec,
            train,
            pipeline,
        })
    }

    /// The fully populated manifest for `run.json`.
    pub fn manifest(resolved: &ResolvedRun, data: &Path, out: &Path) -> RunConfig {
        RunConfig {
            arch: Some(resolved.spec.arch.name().to_string()),
            size: Some(resolved.spec.input.height),
            channels: Some(resolved.spec.input.channels),
            num_classes: Some(resolved.spec.num_classes),
            filters: Some(resolved.spec.filters.clone()),
            block_dropout: Some(resolved.spec.block_dropout),
            head_dropout: Some(resolved.spec.head_dropout),
            l2: Some(resolved.spec.l2),
            dense_width: Some(resolved.spec.dense_width),
            epochs: Some(resolved.train.max_epochs),
            batch_size: Some(resolved.train.batch_size),
            lr: Some(resolved.train.base_lr),
            lr_decay_factor: Some(resolved.train.lr_decay_factor),
            lr_decay_every: Some(resolved.train.lr_decay_every),
            patience: Some(resolved.train.patience),
            min_delta: Some(resolved.train.min_delta),
            seed: Some(resolved.train.seed),
            deterministic: Some(resolved.train.deterministic),
            val_fraction: Some(resolved.pipeline.val_fraction),
            augment: Some(resolved.pipeline.augment),
            prefetch: Some(resolved.pipeline.prefetch_depth),
            data: Some(data.to_path_buf()),
            out: Some(out.to_path_buf()),
            checkpoint: None,
            rng_generator: Some(RNG_GENERATOR_ID.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub spec: ArchitectureSpec,
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>("{\"lr\": 0.001, \"warp_drive\": 9}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("warp_drive"), "{err}");
    }

    #[test]
    fn overlay_prefers_present_fields() {
        let file = RunConfig {
            lr: Some(0.01),
            epochs: Some(10),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            lr: Some(0.001),
            ..RunConfig::default()
        };
        let merged = file.overlaid(flags);
        assert_eq!(merged.lr, Some(0.001));
        assert_eq!(merged.epochs, Some(10));
    }

    #[test]
    fn resolve_fills_module_defaults() {
        let resolved = RunConfig::default().resolve(3).unwrap();
        assert_eq!(resolved.train.max_epochs, 50);
        assert_eq!(resolved.train.batch_size, 32);
        assert_eq!(resolved.train.base_lr, 1e-3);
        assert_eq!(resolved.pipeline.val_fraction, 0.2);
        assert_eq!(resolved.spec.filters, vec![32, 64, 128, 256]);
        assert_eq!(resolved.spec.input.height, 180);
    }

    #[test]
    fn num_classes_mismatch_is_an_error() {
        let cfg = RunConfig {
            num_classes: Some(4),
            ..RunConfig::default()
        };
        assert!(cfg.resolve(3).is_err());
    }

    #[test]
    fn manifest_round_trips_through_serde() {
        let resolved = RunConfig::default().resolve(3).unwrap();
        let manifest = RunConfig::manifest(&resolved, Path::new("/tmp/ds"), Path::new("/tmp/out"));
        let json = serde_json::to_string_pretty(&manifest).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, manifest);
    }
}
