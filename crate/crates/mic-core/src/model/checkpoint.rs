//! Checkpoint files (`.micf`).
//!
//! Layout: magic `MICF` (4 bytes), u32 LE format version, u64 LE header
//! length, UTF-8 JSON header, then raw little-endian f32 blobs — parameter
//! values in registry order, batchnorm running mean/var pairs in layer
//! order, and (optionally) Adam first/second moments per parameter. The
//! header is validated in full before any blob is read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CheckpointError, Error, Result};
use crate::model::{build_model, ArchitectureSpec, Model, WEIGHT_INIT_SCHEME};
use crate::tensor::{Tensor, RNG_GENERATOR_ID};

pub const MAGIC: &[u8; 4] = b"MICF";
pub const FORMAT_VERSION: u32 = 1;

/// Run metadata carried alongside the weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub epoch: u32,
    pub seed: u64,
    pub class_names: Vec<String>,
    /// Adam step counter; meaningful only when optimizer state is stored.
    pub adam_step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    magic: String,
    version: u32,
    arch: ArchitectureSpec,
    dtype: String,
    rng_generator: String,
    weight_init: String,
    epoch: u32,
    seed: u64,
    class_names: Vec<String>,
    has_optimizer: bool,
    adam_step: u64,
}

#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub model: Model<f32>,
    pub meta: CheckpointMeta,
    pub has_optimizer: bool,
}

pub fn save_checkpoint(
    model: &Model<f32>,
    path: impl AsRef<Path>,
    include_optimizer: bool,
    meta: &CheckpointMeta,
) -> Result<()> {
    let header = Header {
        magic: String::from_utf8_lossy(MAGIC).into_owned(),
        version: FORMAT_VERSION,
        arch: model.spec.clone(),
        dtype: "f32".to_string(),
        rng_generator: RNG_GENERATOR_ID.to_string(),
        weight_init: WEIGHT_INIT_SCHEME.to_string(),
        epoch: meta.epoch,
        seed: meta.seed,
        class_names: meta.class_names.clone(),
        has_optimizer: include_optimizer,
        adam_step: if include_optimizer { meta.adam_step } else { 0 },
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| CheckpointError::Header(e.to_string()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;

    for p in model.params() {
        write_blob(&mut w, &p.value)?;
    }
    for bn in model.batchnorms() {
        write_blob(&mut w, &bn.running_mean)?;
        write_blob(&mut w, &bn.running_var)?;
    }
    if include_optimizer {
        for p in model.params() {
            write_blob(&mut w, &p.adam_m)?;
            write_blob(&mut w, &p.adam_v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<LoadedCheckpoint> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact_or(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let mut version = [0u8; 4];
    read_exact_or(&mut r, &mut version, "version")?;
    let version = u32::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(version).into());
    }
    let mut hlen = [0u8; 8];
    read_exact_or(&mut r, &mut hlen, "header length")?;
    let hlen = u64::from_le_bytes(hlen) as usize;
    let mut header_json = vec![0u8; hlen];
    read_exact_or(&mut r, &mut header_json, "header")?;
    let header: Header =
        serde_json::from_slice(&header_json).map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.magic.as_bytes() != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    if header.version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(header.version).into());
    }
    if header.dtype != "f32" {
        return Err(
            CheckpointError::Header(format!("unsupported dtype `{}`", header.dtype)).into(),
        );
    }
    if header.rng_generator != RNG_GENERATOR_ID {
        return Err(CheckpointError::Header(format!(
            "checkpoint was written by rng generator `{}`, this build uses `{RNG_GENERATOR_ID}`",
            header.rng_generator
        ))
        .into());
    }

    // Rebuild the skeleton from the architecture, then overwrite every blob.
    let mut model = build_model::<f32>(&header.arch, header.seed)?;
    for p in model.params_mut() {
        read_blob(&mut r, &mut p.value, &p.name.clone())?;
    }
    for (i, bn) in model.batchnorms_mut().into_iter().enumerate() {
        read_blob(&mut r, &mut bn.running_mean, &format!("bn{i}.running_mean"))?;
        read_blob(&mut r, &mut bn.running_var, &format!("bn{i}.running_var"))?;
    }
    if header.has_optimizer {
        for p in model.params_mut() {
            let name = p.name.clone();
            read_blob(&mut r, &mut p.adam_m, &format!("{name}.adam_m"))?;
            read_blob(&mut r, &mut p.adam_v, &format!("{name}.adam_v"))?;
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CheckpointError::Header("trailing bytes after final blob".into()).into());
    }

    Ok(LoadedCheckpoint {
        model,
        meta: CheckpointMeta {
            epoch: header.epoch,
            seed: header.seed,
            class_names: header.class_names,
            adam_step: header.adam_step,
        },
        has_optimizer: header.has_optimizer,
    })
}

fn write_blob(w: &mut impl Write, t: &Tensor<f32>) -> Result<()> {
    let mut bytes = Vec::with_capacity(t.len() * 4);
    for &v in t.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_blob(r: &mut impl Read, t: &mut Tensor<f32>, name: &str) -> Result<()> {
    let expected = t.len() * 4;
    let mut bytes = vec![0u8; expected];
    let mut filled = 0;
    while filled < expected {
        let n = r.read(&mut bytes[filled..])?;
        if n == 0 {
            return Err(CheckpointError::Truncated {
                name: name.to_string(),
                expected,
                got: filled,
            }
            .into());
        }
        filled += n;
    }
    for (v, chunk) in t.data_mut().iter_mut().zip(bytes.chunks_exact(4)) {
        *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
    }
    Ok(())
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| {
        Error::from(CheckpointError::Truncated {
            name: what.to_string(),
            expected: buf.len(),
            got: 0,
        })
    })
}
