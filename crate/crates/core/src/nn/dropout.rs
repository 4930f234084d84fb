//! Inverted dropout: units are zeroed with probability `rate` during
//! training and survivors scaled by 1/(1-rate); inference is the identity.

use alloc::vec::Vec;

use super::{Layer, NnError};
use crate::rng::Rng;
use crate::tensor::{real, Real, Tensor};

pub struct Dropout<T> {
    rate: f64,
    mask: Option<Tensor<T>>,
}

impl<T: Real> Dropout<T> {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Dropout { rate, mask: None }
    }
}

impl<T: Real> Layer<T> for Dropout<T> {
    fn name(&self) -> &'static str {
        "dropout"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(in_shape.to_vec())
    }

    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let keep_scale = real::<T>(1.0 / (1.0 - self.rate));
        let mut mask = Tensor::zeros(x.shape());
        for m in mask.data_mut() {
            if !rng.chance(self.rate) {
                *m = keep_scale;
            }
        }
        let mut y = x.clone();
        for (v, &m) in y.data_mut().iter_mut().zip(mask.iter()) {
            *v = *v * m;
        }
        self.mask = Some(mask);
        Ok(y)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(x.clone())
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mask = self.mask.take().ok_or_else(|| {
            NnError::Config("dropout backward without forward".into())
        })?;
        let mut dx = grad_out.clone();
        for (d, &m) in dx.data_mut().iter_mut().zip(mask.iter()) {
            *d = *d * m;
        }
        Ok(dx)
    }
}
