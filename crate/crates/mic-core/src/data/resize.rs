//! Bilinear resize with half-pixel-center coordinates, plus pixel rescaling.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Map u8-valued pixels onto [0, 1] by dividing by 255.
pub fn rescale(x: &Tensor<f32>) -> Tensor<f32> {
    x.map(|v| v / 255.0)
}

/// Resize `[h, w, c]` to `[out_h, out_w, c]`. Source coordinates follow
/// `src = (dst + 0.5) * scale - 0.5`, clamped to the borders, so the result
/// of resizing to the same size is the identity and values never leave the
/// input range.
pub fn resize_bilinear(x: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let (h, w, c) = match x.shape() {
        [h, w, c] => (*h, *w, *c),
        s => {
            return Err(Error::shape(
                "resize_bilinear",
                format!("expected [h, w, c], got {s:?}"),
            ))
        }
    };
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize target must be >= 1 in both dims"));
    }
    if h == out_h && w == out_w {
        return Ok(x.clone());
    }
    let scale_y = h as f64 / out_h as f64;
    let scale_x = w as f64 / out_w as f64;
    let src = x.data();
    let mut out = Tensor::<f32>::zeros(vec![out_h, out_w, c]);
    let dst = out.data_mut();

    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = (sy - y0 as f64) as f32;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = (sx - x0 as f64) as f32;
            for ch in 0..c {
                let a = src[(y0 * w + x0) * c + ch];
                let b = src[(y0 * w + x1) * c + ch];
                let d = src[(y1 * w + x0) * c + ch];
                let e = src[(y1 * w + x1) * c + ch];
                let top = a + (b - a) * fx;
                let bot = d + (e - d) * fx;
                dst[(oy * out_w + ox) * c + ch] = top + (bot - top) * fy;
            }
        }
    }
    Ok(out)
}
