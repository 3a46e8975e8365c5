//! 3x3 same-padding stride-1 convolution, implemented as im2col + matmul.
//!
//! The backward input gradient is computed in gather form — a correlation of
//! the output gradient with the 180-degree-rotated, channel-swapped kernel —
//! so no scatter races exist and the parallel path stays bitwise equal to
//! the sequential one.

use crate::error::{Error, Result};
use crate::layers::{nhwc, LayerContext, Parameter};
use crate::tensor::kernels::for_each_row;
use crate::tensor::{matmul, matmul_tn, pad2d, Float, Tensor};

#[derive(Debug, Clone)]
pub struct Conv2d<E: Float = f32> {
    /// Shape `[3, 3, cin, cout]`.
    pub kernel: Parameter<E>,
    /// Shape `[cout]`.
    pub bias: Parameter<E>,
}

impl<E: Float> Conv2d<E> {
    pub fn new(kernel: Parameter<E>, bias: Parameter<E>) -> Result<Self> {
        match kernel.value.shape() {
            [3, 3, _, cout] if bias.value.shape() == [*cout] => Ok(Self { kernel, bias }),
            ks => Err(Error::shape(
                "conv2d",
                format!(
                    "kernel must be [3,3,cin,cout] with matching bias, got kernel {ks:?} bias {:?}",
                    bias.value.shape()
                ),
            )),
        }
    }

    pub fn cin(&self) -> usize {
        self.kernel.value.shape()[2]
    }

    pub fn cout(&self) -> usize {
        self.kernel.value.shape()[3]
    }

    pub fn forward(&self, x: &Tensor<E>) -> Result<(Tensor<E>, LayerContext<E>)> {
        let [n, h, w, cin] = nhwc(x, "conv2d")?;
        if cin != self.cin() {
            return Err(Error::shape(
                "conv2d",
                format!("input has {cin} channels, kernel expects {}", self.cin()),
            ));
        }
        let cout = self.cout();
        let padded = pad2d(x, 1, 1, 1, 1)?;
        let cols = im2col_3x3(&padded, n, h, w, cin);

        let kmat = self
            .kernel
            .value
            .clone()
            .reshape(vec![9 * cin, cout])
            .expect("kernel reshape");
        let mut y = matmul(&cols, &kmat)?;
        let bias = self.bias.value.data();
        for row in y.data_mut().chunks_mut(cout) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        let y = y.reshape(vec![n, h, w, cout]).expect("output reshape");
        Ok((
            y,
            LayerContext::Conv2d {
                cols,
                in_shape: [n, h, w, cin],
            },
        ))
    }

    pub fn backward(&mut self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::Conv2d { cols, in_shape } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        let [n, h, w, cin] = in_shape;
        let cout = self.cout();
        if dy.shape() != [n, h, w, cout] {
            return Err(Error::shape(
                "conv2d backward",
                format!(
                    "dy {:?} does not match output [{n}, {h}, {w}, {cout}]",
                    dy.shape()
                ),
            ));
        }
        let rows = n * h * w;
        let dy2 = dy.clone().reshape(vec![rows, cout]).expect("dy reshape");

        // db[o] = sum over positions of dy.
        {
            let db = self.bias.grad.data_mut();
            for row in dy2.data().chunks(cout) {
                for (g, &v) in db.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }

        // dK = cols^T . dy, in the kernel's own row-major layout.
        let dk = matmul_tn(&cols, &dy2)?;
        for (g, &v) in self.kernel.grad.data_mut().iter_mut().zip(dk.data()) {
            *g += v;
        }

        // dx = correlation of dy with the rotated kernel, channels swapped:
        // dx[b,p,q,c] = sum_{di,dj,o} dy_pad[b,p+di,q+dj,o] * k[2-di,2-dj,c,o]
        let kd = self.kernel.value.data();
        let mut krot = Tensor::<E>::zeros(vec![9 * cout, cin]);
        {
            let kr = krot.data_mut();
            for di in 0..3 {
                for dj in 0..3 {
                    for c in 0..cin {
                        for o in 0..cout {
                            let src = (((2 - di) * 3 + (2 - dj)) * cin + c) * cout + o;
                            kr[((di * 3 + dj) * cout + o) * cin + c] = kd[src];
                        }
                    }
                }
            }
        }
        let dy_pad = pad2d(dy, 1, 1, 1, 1)?;
        let dy_cols = im2col_3x3(&dy_pad, n, h, w, cout);
        let dx = matmul(&dy_cols, &krot)?;
        Ok(dx.reshape(vec![n, h, w, cin]).expect("dx reshape"))
    }
}

/// Unroll 3x3 patches of a padded NHWC tensor into a `[n*h*w, 9*c]` matrix.
/// `h`/`w` are the unpadded spatial dims; `padded` is `[n, h+2, w+2, c]`.
fn im2col_3x3<E: Float>(padded: &Tensor<E>, n: usize, h: usize, w: usize, c: usize) -> Tensor<E> {
    let (ph, pw) = (h + 2, w + 2);
    let src = padded.data();
    let mut cols = Tensor::<E>::zeros(vec![n * h * w, 9 * c]);
    for_each_row(cols.data_mut(), 9 * c, 9 * c, |row, out| {
        let b = row / (h * w);
        let i = (row / w) % h;
        let j = row % w;
        for di in 0..3 {
            for dj in 0..3 {
                let s = ((b * ph + i + di) * pw + j + dj) * c;
                let d = (di * 3 + dj) * c;
                out[d..d + c].copy_from_slice(&src[s..s + c]);
            }
        }
    });
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{rng_uniform, RngStream};

    fn conv_from_kernel<E: Float>(kernel: Tensor<E>, bias: Tensor<E>) -> Conv2d<E> {
        Conv2d::new(
            Parameter::new("k", kernel, 0.0),
            Parameter::new("b", bias, 0.0),
        )
        .unwrap()
    }

    /// Direct nested-loop convolution, the oracle the im2col path must match.
    pub(crate) fn conv2d_direct<E: Float>(
        x: &Tensor<E>,
        kernel: &Tensor<E>,
        bias: &Tensor<E>,
    ) -> Tensor<E> {
        let [n, h, w, cin] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let cout = kernel.shape()[3];
        let mut y = Tensor::<E>::zeros(vec![n, h, w, cout]);
        for b in 0..n {
            for i in 0..h {
                for j in 0..w {
                    for o in 0..cout {
                        let mut acc = E::ZERO;
                        for di in 0..3 {
                            for dj in 0..3 {
                                let (ii, jj) = (i + di, j + dj);
                                if ii == 0 || jj == 0 || ii > h || jj > w {
                                    continue; // zero padding
                                }
                                for c in 0..cin {
                                    acc +=
                                        x.at(&[b, ii - 1, jj - 1, c]) * kernel.at(&[di, dj, c, o]);
                                }
                            }
                        }
                        y.set(&[b, i, j, o], acc + bias.at(&[o]));
                    }
                }
            }
        }
        y
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut kernel = Tensor::<f32>::zeros(vec![3, 3, 1, 1]);
        kernel.set(&[1, 1, 0, 0], 1.0);
        let conv = conv_from_kernel(kernel, Tensor::zeros(vec![1]));
        let mut rng = RngStream::new(1, 0);
        let x = rng_uniform::<f32>(&mut rng, 0.0, 1.0, vec![1, 5, 4, 1]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_sums_window() {
        let kernel = Tensor::<f32>::full(vec![3, 3, 1, 1], 1.0);
        let bias = Tensor::new(vec![1], vec![0.5f32]).unwrap();
        let conv = conv_from_kernel(kernel, bias);
        let x = Tensor::<f32>::full(vec![1, 5, 5, 1], 2.0);
        let (y, _) = conv.forward(&x).unwrap();
        // Interior pixel sees the full 3x3 window of the constant input.
        assert_eq!(y.at(&[0, 2, 2, 0]), 9.0 * 2.0 + 0.5);
        // Corner pixel sees only a 2x2 window.
        assert_eq!(y.at(&[0, 0, 0, 0]), 4.0 * 2.0 + 0.5);
    }

    #[test]
    fn im2col_path_matches_direct_loops() {
        let mut rng = RngStream::new(42, 0);
        let x = rng_uniform::<f32>(&mut rng, -1.0, 1.0, vec![1, 8, 8, 3]).unwrap();
        let kernel = rng_uniform::<f32>(&mut rng, -0.5, 0.5, vec![3, 3, 3, 4]).unwrap();
        let bias = rng_uniform::<f32>(&mut rng, -0.5, 0.5, vec![4]).unwrap();
        let conv = conv_from_kernel(kernel.clone(), bias.clone());
        let (y, _) = conv.forward(&x).unwrap();
        let oracle = conv2d_direct(&x, &kernel, &bias);
        for (&a, &b) in y.iter().zip(oracle.iter()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let conv = conv_from_kernel(
            Tensor::<f32>::zeros(vec![3, 3, 2, 4]),
            Tensor::zeros(vec![4]),
        );
        let x = Tensor::<f32>::zeros(vec![1, 4, 4, 3]);
        assert!(conv.forward(&x).is_err());
    }

    #[test]
    fn output_shape_matches_input_spatial_shape() {
        let conv = conv_from_kernel(
            Tensor::<f32>::zeros(vec![3, 3, 2, 5]),
            Tensor::zeros(vec![5]),
        );
        for (h, w) in [(1, 1), (1, 7), (4, 4), (9, 2)] {
            let x = Tensor::<f32>::zeros(vec![2, h, w, 2]);
            let (y, _) = conv.forward(&x).unwrap();
            assert_eq!(y.shape(), &[2, h, w, 5]);
        }
    }
}
