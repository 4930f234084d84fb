//! 1-D max pooling with a trailing partial window over the remainder.

use alloc::format;
use alloc::vec::Vec;

use super::{shape_err, Layer, NnError};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

pub struct MaxPool1d<T> {
    pool: usize,
    /// Absolute source index chosen per output cell, for gradient routing.
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
    _marker: core::marker::PhantomData<T>,
}

impl<T: Real> MaxPool1d<T> {
    pub fn new(pool: usize) -> Self {
        assert!(pool >= 1);
        MaxPool1d { pool, argmax: Vec::new(), in_shape: Vec::new(), _marker: core::marker::PhantomData }
    }

    fn out_len(&self, length: usize) -> usize {
        length.div_ceil(self.pool)
    }

    fn pool_forward(&self, x: &Tensor<T>, record: Option<&mut Vec<usize>>) -> Tensor<T> {
        let (batch, length, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let out_len = self.out_len(length);
        let mut out = Tensor::zeros(&[batch, out_len, ch]);
        let mut indices = alloc::vec![0usize; batch * out_len * ch];
        let xd = x.data();
        let od = out.data_mut();
        for b in 0..batch {
            for ow in 0..out_len {
                let start = ow * self.pool;
                let end = (start + self.pool).min(length);
                for c in 0..ch {
                    // Strict comparison keeps the lowest index on ties.
                    let mut best = start;
                    let mut best_v = xd[(b * length + start) * ch + c];
                    for t in start + 1..end {
                        let v = xd[(b * length + t) * ch + c];
                        if v > best_v {
                            best_v = v;
                            best = t;
                        }
                    }
                    od[(b * out_len + ow) * ch + c] = best_v;
                    indices[(b * out_len + ow) * ch + c] = best;
                }
            }
        }
        if let Some(slot) = record {
            *slot = indices;
        }
        out
    }
}

impl<T: Real> Layer<T> for MaxPool1d<T> {
    fn name(&self) -> &'static str {
        "maxpool1d"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        match *in_shape {
            [batch, length, ch] if length >= 1 => Ok(alloc::vec![batch, self.out_len(length), ch]),
            _ => shape_err(format!("maxpool1d expects (batch, length, channels), got {in_shape:?}")),
        }
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        self.out_shape(x.shape())?;
        self.in_shape = x.shape().to_vec();
        let mut indices = Vec::new();
        let out = self.pool_forward(x, Some(&mut indices));
        self.argmax = indices;
        Ok(out)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.out_shape(x.shape())?;
        Ok(self.pool_forward(x, None))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        if self.in_shape.is_empty() {
            return Err(NnError::Config("maxpool1d backward without forward".into()));
        }
        let (batch, length, ch) = (self.in_shape[0], self.in_shape[1], self.in_shape[2]);
        let out_len = self.out_len(length);
        if grad_out.shape() != [batch, out_len, ch] {
            return shape_err(format!(
                "maxpool1d backward expects ({batch}, {out_len}, {ch}), got {:?}",
                grad_out.shape()
            ));
        }
        let mut dx = Tensor::zeros(&[batch, length, ch]);
        let dxd = dx.data_mut();
        for (cell, &g) in grad_out.data().iter().enumerate() {
            let c = cell % ch;
            let b = cell / (ch * out_len);
            let src = self.argmax[cell];
            dxd[(b * length + src) * ch + c] = dxd[(b * length + src) * ch + c] + g;
        }
        Ok(dx)
    }
}
