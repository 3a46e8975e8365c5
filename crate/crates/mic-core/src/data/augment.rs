//! Training-time augmentation: horizontal flip, small rotation, zoom.
//!
//! Transforms apply in that order, each via inverse mapping with bilinear
//! sampling and zero fill outside the source. The caller supplies a stream
//! derived from (seed, epoch, sample index), so results are independent of
//! prefetch scheduling and worker count.

use crate::data::PipelineConfig;
use crate::error::{Error, Result};
use crate::tensor::{RngStream, Tensor};

/// The three random draws behind one augmented sample, in draw order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraws {
    pub flip: bool,
    pub rotation_deg: f64,
    pub zoom: f64,
}

/// Consume exactly three uniform draws regardless of outcomes, keeping the
/// stream position deterministic.
pub fn sample_draws(cfg: &PipelineConfig, rng: &mut RngStream) -> AugmentDraws {
    let flip = rng.next_bool(cfg.flip_prob);
    let r = cfg.rotation_limit_deg;
    let rotation_deg = if r > 0.0 {
        rng.next_uniform(-r, r)
    } else {
        rng.next_unit_f64() * 0.0
    };
    let z = cfg.zoom_limit;
    let zoom = if z > 0.0 {
        rng.next_uniform(1.0 - z, 1.0 + z)
    } else {
        1.0 + rng.next_unit_f64() * 0.0
    };
    AugmentDraws {
        flip,
        rotation_deg,
        zoom,
    }
}

/// Apply flip, rotation, and zoom with draws from `rng`.
pub fn augment_sample(
    x: &Tensor<f32>,
    cfg: &PipelineConfig,
    rng: &mut RngStream,
) -> Result<Tensor<f32>> {
    let draws = sample_draws(cfg, rng);
    apply_draws(x, &draws)
}

/// Deterministic application of known draws; exposed so the distribution and
/// involution properties are directly testable.
pub(crate) fn apply_draws(x: &Tensor<f32>, draws: &AugmentDraws) -> Result<Tensor<f32>> {
    check_hwc(x)?;
    let mut img = if draws.flip {
        flip_horizontal(x)
    } else {
        x.clone()
    };
    if draws.rotation_deg != 0.0 {
        img = rotate(&img, draws.rotation_deg.to_radians());
    }
    if draws.zoom != 1.0 {
        img = zoom(&img, draws.zoom);
    }
    Ok(img)
}

pub(crate) fn flip_horizontal(x: &Tensor<f32>) -> Tensor<f32> {
    let [h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let src = x.data();
    let mut out = Tensor::<f32>::zeros(vec![h, w, c]);
    let dst = out.data_mut();
    for i in 0..h {
        for j in 0..w {
            let s = (i * w + (w - 1 - j)) * c;
            let d = (i * w + j) * c;
            dst[d..d + c].copy_from_slice(&src[s..s + c]);
        }
    }
    out
}

/// Rotate about the image center; destination pixels map back into the
/// source by the inverse rotation.
fn rotate(x: &Tensor<f32>, theta: f64) -> Tensor<f32> {
    let (sin, cos) = theta.sin_cos();
    resample(x, |cy, cx, dy, dx| {
        let sy = cy + dy * cos - dx * sin;
        let sx = cx + dy * sin + dx * cos;
        (sy, sx)
    })
}

/// Zoom about the image center: `src = center + (dst - center) * s`, so
/// s < 1 magnifies and s > 1 shrinks with a zero border.
fn zoom(x: &Tensor<f32>, s: f64) -> Tensor<f32> {
    resample(x, |cy, cx, dy, dx| (cy + dy * s, cx + dx * s))
}

fn resample(x: &Tensor<f32>, map: impl Fn(f64, f64, f64, f64) -> (f64, f64)) -> Tensor<f32> {
    let [h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = Tensor::<f32>::zeros(vec![h, w, c]);
    let dst = out.data_mut();
    for i in 0..h {
        for j in 0..w {
            let (sy, sx) = map(cy, cx, i as f64 - cy, j as f64 - cx);
            for ch in 0..c {
                dst[(i * w + j) * c + ch] = sample_zero_fill(x, sy, sx, ch);
            }
        }
    }
    out
}

/// Bilinear sample with out-of-bounds taps reading zero.
fn sample_zero_fill(x: &Tensor<f32>, sy: f64, sx: f64, ch: usize) -> f32 {
    let [h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let y0 = sy.floor();
    let x0 = sx.floor();
    let fy = (sy - y0) as f32;
    let fx = (sx - x0) as f32;
    let tap = |yy: f64, xx: f64| -> f32 {
        if yy < 0.0 || xx < 0.0 || yy > (h - 1) as f64 || xx > (w - 1) as f64 {
            0.0
        } else {
            x.data()[(yy as usize * w + xx as usize) * c + ch]
        }
    };
    let a = tap(y0, x0);
    let b = tap(y0, x0 + 1.0);
    let d = tap(y0 + 1.0, x0);
    let e = tap(y0 + 1.0, x0 + 1.0);
    let top = a + (b - a) * fx;
    let bot = d + (e - d) * fx;
    top + (bot - top) * fy
}

fn check_hwc(x: &Tensor<f32>) -> Result<()> {
    match x.shape() {
        [_, _, _] => Ok(()),
        s => Err(Error::shape(
            "augment_sample",
            format!("expected [h, w, c], got {s:?}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rng_uniform;

    fn test_cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    fn random_image(seed: u64, h: usize, w: usize) -> Tensor<f32> {
        let mut rng = RngStream::new(seed, 0);
        rng_uniform::<f32>(&mut rng, 0.0, 1.0, vec![h, w, 1]).unwrap()
    }

    #[test]
    fn neutral_draws_are_the_identity() {
        let x = random_image(1, 9, 7);
        let draws = AugmentDraws {
            flip: false,
            rotation_deg: 0.0,
            zoom: 1.0,
        };
        let y = apply_draws(&x, &draws).unwrap();
        for (&a, &b) in y.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn flip_is_an_involution() {
        let x = random_image(2, 6, 11);
        let once = flip_horizontal(&x);
        let twice = flip_horizontal(&once);
        assert_eq!(twice, x);
    }

    #[test]
    fn draw_distribution_respects_limits() {
        // 10^4 seeded draws: rotations within +-18 degrees with mean |theta|
        // near 9, zooms within [0.9, 1.1].
        let cfg = test_cfg();
        let mut rng = RngStream::new(88, 0);
        let mut abs_sum = 0.0f64;
        let n = 10_000;
        for _ in 0..n {
            let d = sample_draws(&cfg, &mut rng);
            assert!(
                (-18.0..=18.0).contains(&d.rotation_deg),
                "rotation {} out of range",
                d.rotation_deg
            );
            assert!(
                (0.9..=1.1).contains(&d.zoom),
                "zoom {} out of range",
                d.zoom
            );
            abs_sum += d.rotation_deg.abs();
        }
        let mean_abs = abs_sum / n as f64;
        assert!((mean_abs - 9.0).abs() < 0.5, "mean |theta| = {mean_abs}");
    }

    #[test]
    fn constant_image_stays_constant_away_from_borders() {
        let x = Tensor::full(vec![16, 16, 1], 0.75f32);
        let draws = AugmentDraws {
            flip: true,
            rotation_deg: 10.0,
            zoom: 1.05,
        };
        let y = apply_draws(&x, &draws).unwrap();
        // Interior pixels interpolate among constant values; borders may see
        // the zero fill.
        for i in 5..11 {
            for j in 5..11 {
                let v = y.at(&[i, j, 0]);
                assert!((v - 0.75).abs() < 1e-6, "({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn same_stream_reproduces_the_same_augmentation() {
        let cfg = test_cfg();
        let x = random_image(5, 12, 12);
        let mut a = RngStream::derive(7, &[3, 1, 42]);
        let mut b = RngStream::derive(7, &[3, 1, 42]);
        let ya = augment_sample(&x, &cfg, &mut a).unwrap();
        let yb = augment_sample(&x, &cfg, &mut b).unwrap();
        assert_eq!(ya, yb);
    }

    #[test]
    fn output_shape_is_preserved() {
        let cfg = test_cfg();
        let x = random_image(9, 10, 14);
        let mut rng = RngStream::new(1, 1);
        let y = augment_sample(&x, &cfg, &mut rng).unwrap();
        assert_eq!(y.shape(), x.shape());
    }
}
