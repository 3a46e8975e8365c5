//! Shape-level tensor operations: zero padding, cropping, axis means.

use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

/// Zero-pad the spatial axes of an NHWC tensor.
pub fn pad2d<E: Float>(
    x: &Tensor<E>,
    top: usize,
    bottom: usize,
    left: usize,
    right: usize,
) -> Result<Tensor<E>> {
    let [n, h, w, c] = nhwc(x, "pad2d")?;
    let (oh, ow) = (h + top + bottom, w + left + right);
    let mut out = Tensor::zeros(vec![n, oh, ow, c]);
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..n {
        for i in 0..h {
            let s = (b * h + i) * w * c;
            let d = ((b * oh + i + top) * ow + left) * c;
            dst[d..d + w * c].copy_from_slice(&src[s..s + w * c]);
        }
    }
    Ok(out)
}

/// Inverse of [`pad2d`]: keep `[top..top+h, left..left+w]` of the spatial axes.
pub fn crop2d<E: Float>(
    x: &Tensor<E>,
    top: usize,
    left: usize,
    h: usize,
    w: usize,
) -> Result<Tensor<E>> {
    let [n, ih, iw, c] = nhwc(x, "crop2d")?;
    if top + h > ih || left + w > iw {
        return Err(Error::shape(
            "crop2d",
            format!("crop {h}x{w}+{top}+{left} exceeds input {ih}x{iw}"),
        ));
    }
    let mut out = Tensor::zeros(vec![n, h, w, c]);
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..n {
        for i in 0..h {
            let s = ((b * ih + i + top) * iw + left) * c;
            let d = (b * h + i) * w * c;
            dst[d..d + w * c].copy_from_slice(&src[s..s + w * c]);
        }
    }
    Ok(out)
}

/// Arithmetic mean over the named axes; the output shape drops those axes.
/// Accumulation visits elements in row-major order.
pub fn reduce_mean<E: Float>(x: &Tensor<E>, axes: &[usize]) -> Result<Tensor<E>> {
    let rank = x.rank();
    let mut seen = vec![false; rank];
    for &a in axes {
        if a >= rank {
            return Err(Error::invalid(format!(
                "reduce_mean axis {a} out of range for rank {rank}"
            )));
        }
        if seen[a] {
            return Err(Error::invalid(format!("reduce_mean axis {a} duplicated")));
        }
        seen[a] = true;
    }
    let out_shape: Vec<usize> = x
        .shape()
        .iter()
        .enumerate()
        .filter(|(i, _)| !seen[*i])
        .map(|(_, &d)| d)
        .collect();
    // Reducing every axis leaves a scalar; represent it as shape [1].
    let out_shape = if out_shape.is_empty() {
        vec![1]
    } else {
        out_shape
    };

    let mut sums = Tensor::<E>::zeros(out_shape.clone());
    let kept: Vec<usize> = (0..rank).filter(|i| !seen[*i]).collect();
    let mut out_strides = vec![0usize; rank];
    {
        let mut stride = 1;
        for &axis in kept.iter().rev() {
            out_strides[axis] = stride;
            stride *= x.shape()[axis];
        }
    }

    let shape = x.shape().to_vec();
    let mut idx = vec![0usize; rank];
    let sums_data = sums.data_mut();
    for &v in x.iter() {
        let mut off = 0;
        for a in 0..rank {
            off += idx[a] * out_strides[a];
        }
        sums_data[off] += v;
        // Advance the row-major multi-index.
        for a in (0..rank).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }

    let count: usize = axes.iter().map(|&a| x.shape()[a]).product();
    let count = E::from_f64(count as f64);
    Ok(sums.map(|v| v / count))
}

fn nhwc<E: Float>(x: &Tensor<E>, op: &'static str) -> Result<[usize; 4]> {
    match x.shape() {
        [n, h, w, c] => Ok([*n, *h, *w, *c]),
        s => Err(Error::shape(op, format!("expected NHWC tensor, got {s:?}"))),
    }
}
