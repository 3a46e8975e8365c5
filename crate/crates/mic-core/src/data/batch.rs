//! Batch assembly with optional bounded prefetch.
//!
//! Batch content is a pure function of (records, config, epoch): the epoch
//! order comes from a stream derived from (seed, epoch) and every sample's
//! augmentation stream is derived from (seed, epoch, record index). A
//! producer thread therefore yields exactly the batches the inline path
//! would, at any prefetch depth.

use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::data::{
    augment_sample, decode_image, rescale, resize_bilinear, to_channels, PipelineConfig,
    SampleRecord, SampleSource,
};
use crate::error::{Error, Result};
use crate::model::streams;
use crate::tensor::{RngStream, Tensor};

/// A collated batch: inputs in [0, 1], NHWC, plus integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor<f32>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A set of records plus the pipeline configuration that turns them into
/// batches, one epoch at a time.
#[derive(Debug, Clone)]
pub struct DataSource {
    records: Arc<Vec<SampleRecord>>,
    cfg: PipelineConfig,
}

impl DataSource {
    pub fn new(records: Vec<SampleRecord>, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            records: Arc::new(records),
            cfg,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Batches for one epoch. Training iteration reshuffles per epoch and
    /// augments; evaluation iteration is unshuffled and unaugmented.
    pub fn epoch_batches(&self, epoch: u32, training: bool) -> BatchIter {
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        if training {
            let mut rng = RngStream::derive(self.cfg.seed, &[streams::SHUFFLE, epoch as u64]);
            rng.shuffle(&mut order);
        }
        let plan: Vec<Vec<usize>> = order
            .chunks(self.cfg.batch_size)
            .map(|c| c.to_vec())
            .collect();

        if self.cfg.prefetch_depth == 0 {
            BatchIter::Inline {
                records: self.records.clone(),
                cfg: self.cfg.clone(),
                plan: plan.into_iter(),
                epoch,
                training,
            }
        } else {
            let (tx, rx) = sync_channel(self.cfg.prefetch_depth);
            let records = self.records.clone();
            let cfg = self.cfg.clone();
            let handle = std::thread::spawn(move || {
                for chunk in plan {
                    let batch = assemble_batch(&records, &cfg, &chunk, epoch, training);
                    let stop = batch.is_err();
                    if tx.send(batch).is_err() || stop {
                        break;
                    }
                }
            });
            BatchIter::Prefetch {
                rx,
                handle: Some(handle),
            }
        }
    }
}

pub enum BatchIter {
    Inline {
        records: Arc<Vec<SampleRecord>>,
        cfg: PipelineConfig,
        plan: std::vec::IntoIter<Vec<usize>>,
        epoch: u32,
        training: bool,
    },
    Prefetch {
        rx: Receiver<Result<Batch>>,
        handle: Option<JoinHandle<()>>,
    },
}

impl Iterator for BatchIter {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            BatchIter::Inline {
                records,
                cfg,
                plan,
                epoch,
                training,
            } => loop {
                let chunk = plan.next()?;
                match assemble_batch(records, cfg, &chunk, *epoch, *training) {
                    Ok(b) if b.is_empty() => continue, // all samples skipped
                    other => return Some(other),
                }
            },
            BatchIter::Prefetch { rx, .. } => loop {
                match rx.recv() {
                    Ok(Ok(b)) if b.is_empty() => continue,
                    Ok(item) => return Some(item),
                    Err(_) => return None,
                }
            },
        }
    }
}

impl Drop for BatchIter {
    fn drop(&mut self) {
        if let BatchIter::Prefetch { rx, handle } = self {
            // Dropping the receiver unblocks a producer stuck on send; swap
            // in a disconnected dummy so the real one drops here.
            drop(std::mem::replace(rx, sync_channel(1).1));
            if let Some(h) = handle.take() {
                let _ = h.join();
            }
        }
    }
}

fn assemble_batch(
    records: &[SampleRecord],
    cfg: &PipelineConfig,
    chunk: &[usize],
    epoch: u32,
    training: bool,
) -> Result<Batch> {
    let size = cfg.image_size;
    let mut inputs = Vec::with_capacity(chunk.len() * size * size * cfg.channels);
    let mut labels = Vec::with_capacity(chunk.len());
    for &record_index in chunk {
        let record = &records[record_index];
        let sample = match load_sample(record, cfg, epoch, training, record_index) {
            Ok(s) => s,
            Err(e) if !cfg.strict_decode && matches!(e, Error::Decode(_)) => {
                eprintln!(
                    "warning: skipping undecodable sample {:?}: {e}",
                    record.class_name
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        inputs.extend_from_slice(sample.data());
        labels.push(record.class_index);
    }
    if labels.is_empty() {
        // Every sample in the chunk was skipped; signal with an empty batch.
        return Ok(Batch {
            inputs: Tensor::zeros(vec![1, size, size, cfg.channels]),
            labels,
        });
    }
    let n = labels.len();
    let inputs = Tensor::new(vec![n, size, size, cfg.channels], inputs)?;
    Ok(Batch { inputs, labels })
}

/// decode -> channel adapt -> resize -> rescale -> (training only) augment.
fn load_sample(
    record: &SampleRecord,
    cfg: &PipelineConfig,
    epoch: u32,
    training: bool,
    record_index: usize,
) -> Result<Tensor<f32>> {
    let raw = match &record.source {
        SampleSource::Path(path) => {
            let bytes = std::fs::read(path)?;
            decode_image(&bytes).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?
        }
        SampleSource::Pixels(t) => t.as_ref().clone(),
    };
    let adapted = to_channels(&raw, cfg.channels)?;
    let resized = resize_bilinear(&adapted, cfg.image_size, cfg.image_size)?;
    let mut scaled = rescale(&resized);
    if training && cfg.augment {
        let mut rng = RngStream::derive(
            cfg.seed,
            &[streams::AUGMENT, epoch as u64, record_index as u64],
        );
        scaled = augment_sample(&scaled, cfg, &mut rng)?;
    }
    Ok(scaled)
}
