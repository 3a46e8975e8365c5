//! Synthetic three-class dataset generator: a desk-scale stand-in with the
//! same directory layout as the real chest-X-ray collection.
//!
//! Class 0 is a centered Gaussian blob (sigma = size/6), class 1 vertical
//! stripes (period size/8), class 2 a checkerboard (cell size/8); every
//! image gets additive uniform noise of amplitude 0.1 * 255, clamped to
//! 0..=255, and is written as an 8-bit grayscale PNG.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::decode::encode_png_gray;
use crate::error::{Error, Result};
use crate::model::streams;
use crate::tensor::RngStream;

/// Folder names in index order; chosen to sort like the real dataset's
/// classes so label indices line up.
pub const SYNTH_CLASS_NAMES: [&str; 3] = ["COVID19", "NORMAL", "PNEUMONIA"];

const PATTERNS: [&str; 3] = ["gaussian-blob", "vertical-stripes", "checkerboard"];
const NOISE_AMPLITUDE: f64 = 0.1 * 255.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub generator: String,
    pub seed: u64,
    pub per_class: usize,
    pub size: usize,
    pub classes: Vec<SynthClass>,
    pub noise_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    pub pattern: String,
}

/// Write `train/<CLASS>/img_*.png` for the three classes plus a
/// `manifest.json` recording the generator parameters.
pub fn gen_synthetic(
    out_dir: impl AsRef<Path>,
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<SynthManifest> {
    if per_class == 0 {
        return Err(Error::invalid("per-class count must be >= 1"));
    }
    if size < 8 {
        return Err(Error::invalid("image size must be >= 8"));
    }
    let out_dir = out_dir.as_ref();

    for (class_index, name) in SYNTH_CLASS_NAMES.iter().enumerate() {
        let dir = out_dir.join("train").join(name);
        std::fs::create_dir_all(&dir)?;
        for img_index in 0..per_class {
            let mut rng = RngStream::derive(
                seed,
                &[streams::SYNTH, class_index as u64, img_index as u64],
            );
            let pixels = render(class_index, size, &mut rng);
            let png = encode_png_gray(&pixels, size, size)?;
            std::fs::write(dir.join(format!("img_{img_index:04}.png")), png)?;
        }
    }

    let manifest = SynthManifest {
        generator: "synthetic-v1".into(),
        seed,
        per_class,
        size,
        classes: SYNTH_CLASS_NAMES
            .iter()
            .zip(PATTERNS)
            .map(|(name, pattern)| SynthClass {
                name: (*name).into(),
                pattern: pattern.into(),
            })
            .collect(),
        noise_amplitude: NOISE_AMPLITUDE,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid(format!("manifest serialization: {e}")))?;
    std::fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

fn render(class_index: usize, size: usize, rng: &mut RngStream) -> Vec<u8> {
    let n = size as f64;
    let center = (n - 1.0) / 2.0;
    let sigma = n / 6.0;
    let period = n / 8.0;
    let cell = (size / 8).max(1);

    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let base = match class_index {
                0 => {
                    let dy = y as f64 - center;
                    let dx = x as f64 - center;
                    255.0 * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                }
                1 => 255.0 * (0.5 + 0.5 * (std::f64::consts::TAU * x as f64 / period).sin()),
                _ => {
                    if (x / cell + y / cell).is_multiple_of(2) {
                        204.0
                    } else {
                        51.0
                    }
                }
            };
            let noise = rng.next_uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE);
            pixels.push((base + noise).clamp(0.0, 255.0).round() as u8);
        }
    }
    pixels
}
