//! Spatial pooling: 2x2/stride-2 max pooling and global average pooling.

use crate::error::{Error, Result};
use crate::layers::{nhwc, LayerContext};
use crate::tensor::{Float, Tensor};

/// 2x2 window, stride 2, no padding; an odd trailing row/column is dropped.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxPool;

impl MaxPool {
    pub fn forward<E: Float>(&self, x: &Tensor<E>) -> Result<(Tensor<E>, LayerContext<E>)> {
        let [n, h, w, c] = nhwc(x, "maxpool2d")?;
        if h < 2 || w < 2 {
            return Err(Error::shape(
                "maxpool2d",
                format!("spatial dims must be >= 2, got {h}x{w}"),
            ));
        }
        let (oh, ow) = (h / 2, w / 2);
        let src = x.data();
        let mut y = Tensor::<E>::zeros(vec![n, oh, ow, c]);
        let mut argmax = vec![0u32; y.len()];
        {
            let yd = y.data_mut();
            let mut out_i = 0;
            for b in 0..n {
                for i in 0..oh {
                    for j in 0..ow {
                        for ch in 0..c {
                            // Scan the window in row-major order with a strict
                            // comparison: ties keep the first position.
                            let mut best_idx = ((b * h + 2 * i) * w + 2 * j) * c + ch;
                            let mut best = src[best_idx];
                            for di in 0..2 {
                                for dj in 0..2 {
                                    let idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
                                    if src[idx] > best {
                                        best = src[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            yd[out_i] = best;
                            argmax[out_i] = best_idx as u32;
                            out_i += 1;
                        }
                    }
                }
            }
        }
        Ok((
            y,
            LayerContext::MaxPool {
                argmax,
                in_shape: [n, h, w, c],
            },
        ))
    }

    pub fn backward<E: Float>(&self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::MaxPool { argmax, in_shape } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        if dy.len() != argmax.len() {
            return Err(Error::shape(
                "maxpool2d backward",
                format!(
                    "dy has {} elements, forward produced {}",
                    dy.len(),
                    argmax.len()
                ),
            ));
        }
        let mut dx = Tensor::<E>::zeros(in_shape.to_vec());
        let dxd = dx.data_mut();
        for (&g, &idx) in dy.data().iter().zip(&argmax) {
            dxd[idx as usize] += g;
        }
        Ok(dx)
    }
}

/// Mean over the spatial axes: `[n,h,w,c] -> [n,c]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GlobalAvgPool;

impl GlobalAvgPool {
    pub fn forward<E: Float>(&self, x: &Tensor<E>) -> Result<(Tensor<E>, LayerContext<E>)> {
        let [n, h, w, c] = nhwc(x, "global_avg_pool")?;
        let count = E::from_f64((h * w) as f64);
        let mut y = Tensor::<E>::zeros(vec![n, c]);
        {
            let yd = y.data_mut();
            for (i, &v) in x.data().iter().enumerate() {
                let b = i / (h * w * c);
                let ch = i % c;
                yd[b * c + ch] += v;
            }
            for v in yd.iter_mut() {
                *v = *v / count;
            }
        }
        Ok((
            y,
            LayerContext::GlobalAvgPool {
                in_shape: [n, h, w, c],
            },
        ))
    }

    pub fn backward<E: Float>(&self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::GlobalAvgPool { in_shape } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        let [n, h, w, c] = in_shape;
        if dy.shape() != [n, c] {
            return Err(Error::shape(
                "global_avg_pool backward",
                format!("dy {:?} does not match [{n}, {c}]", dy.shape()),
            ));
        }
        let count = E::from_f64((h * w) as f64);
        let dyd = dy.data();
        let mut dx = Tensor::<E>::zeros(vec![n, h, w, c]);
        for (i, g) in dx.data_mut().iter_mut().enumerate() {
            let b = i / (h * w * c);
            let ch = i % c;
            *g = dyd[b * c + ch] / count;
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_max() {
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = MaxPool.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn tie_routes_gradient_to_first_position() {
        let x = Tensor::<f32>::full(vec![1, 2, 2, 1], 7.0);
        let (y, ctx) = MaxPool.forward(&x).unwrap();
        assert_eq!(y.data(), &[7.0]);
        let dy = Tensor::full(vec![1, 1, 1, 1], 1.0f32);
        let dx = MaxPool.backward(ctx, &dy).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn spatial_chain_from_180_floors_to_11() {
        let mut x = Tensor::<f32>::zeros(vec![1, 180, 180, 1]);
        let mut dims = Vec::new();
        for _ in 0..4 {
            let (y, _) = MaxPool.forward(&x).unwrap();
            dims.push((y.shape()[1], y.shape()[2]));
            x = y;
        }
        assert_eq!(dims, vec![(90, 90), (45, 45), (22, 22), (11, 11)]);
    }

    #[test]
    fn too_small_input_is_rejected() {
        let x = Tensor::<f32>::zeros(vec![1, 1, 4, 1]);
        assert!(MaxPool.forward(&x).is_err());
    }

    #[test]
    fn odd_trailing_row_col_dropped() {
        let x = Tensor::new(
            vec![1, 3, 3, 1],
            vec![1.0f32, 2.0, 9.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0],
        )
        .unwrap();
        let (y, _) = MaxPool.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn gap_of_constant_map_is_the_constant() {
        let x = Tensor::<f32>::full(vec![2, 3, 5, 4], 1.25);
        let (y, _) = GlobalAvgPool.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4]);
        assert!(y.iter().all(|&v| (v - 1.25).abs() < 1e-7));
    }

    #[test]
    fn gap_arithmetic() {
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = GlobalAvgPool.forward(&x).unwrap();
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn gap_backward_spreads_uniformly() {
        let x = Tensor::new(vec![1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (_, ctx) = GlobalAvgPool.forward(&x).unwrap();
        let dy = Tensor::new(vec![1, 1], vec![8.0f32]).unwrap();
        let dx = GlobalAvgPool.backward(ctx, &dy).unwrap();
        assert_eq!(dx.data(), &[2.0, 2.0, 2.0, 2.0]);
    }
}
