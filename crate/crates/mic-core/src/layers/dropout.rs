//! Inverted dropout: surviving activations are scaled by 1/(1-rate) at
//! training time so inference is a pure pass-through.

use crate::error::{Error, Result};
use crate::layers::{LayerContext, Mode};
use crate::tensor::{Float, RngStream, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<E: Float>(
        &self,
        x: &Tensor<E>,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(Tensor<E>, LayerContext<E>)> {
        if mode == Mode::Inference || self.rate == 0.0 {
            return Ok((x.clone(), LayerContext::Dropout { scaled_mask: None }));
        }
        let keep = 1.0 - self.rate;
        let scale = E::from_f64(1.0 / keep);
        let mask_data: Vec<E> = (0..x.len())
            .map(|_| if rng.next_bool(keep) { scale } else { E::ZERO })
            .collect();
        let mask = Tensor::new(x.shape().to_vec(), mask_data).expect("mask shape");
        let mut y = x.clone();
        for (v, &m) in y.data_mut().iter_mut().zip(mask.iter()) {
            *v = *v * m;
        }
        Ok((
            y,
            LayerContext::Dropout {
                scaled_mask: Some(mask),
            },
        ))
    }

    pub fn backward<E: Float>(&self, ctx: LayerContext<E>, dy: &Tensor<E>) -> Result<Tensor<E>> {
        let LayerContext::Dropout { scaled_mask } = ctx else {
            unreachable!("dispatch guarantees the context kind");
        };
        match scaled_mask {
            None => Ok(dy.clone()),
            Some(mask) => {
                if mask.shape() != dy.shape() {
                    return Err(Error::shape(
                        "dropout backward",
                        format!("dy {:?} does not match mask {:?}", dy.shape(), mask.shape()),
                    ));
                }
                let mut dx = dy.clone();
                for (g, &m) in dx.data_mut().iter_mut().zip(mask.iter()) {
                    *g = *g * m;
                }
                Ok(dx)
            }
        }
    }
}
