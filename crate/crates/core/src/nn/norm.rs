//! Batch normalization. The normal variant standardizes each feature of a
//! (batch, features) tensor over the batch; the spatial variant
//! standardizes each channel of a (batch, length, channels) tensor with
//! statistics pooled over batch and time. Both share one kernel because a
//! row-major (batch, length, channels) block is exactly a
//! (batch*length, channels) matrix.

use alloc::format;
use alloc::vec::Vec;

use super::{shape_err, Layer, NnError, ParamGrad};
use crate::rng::Rng;
use crate::tensor::{real, Real, Tensor};

pub struct BatchNorm<T> {
    features: usize,
    spatial: bool,
    momentum: T,
    eps: T,
    gamma: Tensor<T>,
    beta: Tensor<T>,
    running_mean: Tensor<T>,
    running_var: Tensor<T>,
    gamma_grad: Tensor<T>,
    beta_grad: Tensor<T>,
    cache: Option<Cache<T>>,
}

struct Cache<T> {
    x_hat: Tensor<T>, // (rows, features)
    inv_std: Vec<T>,  // per feature
    in_shape: Vec<usize>,
}

impl<T: Real> BatchNorm<T> {
    /// `spatial` selects per-channel statistics pooled over batch and time.
    pub fn new(features: usize, spatial: bool) -> Self {
        BatchNorm {
            features,
            spatial,
            momentum: real(0.9),
            eps: real(1e-5),
            gamma: Tensor::filled(&[features], T::one()),
            beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], T::one()),
            gamma_grad: Tensor::zeros(&[features]),
            beta_grad: Tensor::zeros(&[features]),
            cache: None,
        }
    }

    fn rows(&self, shape: &[usize]) -> Result<usize, NnError> {
        let ok = if self.spatial {
            shape.len() == 3 && shape[2] == self.features
        } else {
            shape.len() == 2 && shape[1] == self.features
        };
        if !ok {
            return shape_err(format!(
                "batch norm ({}) over {} features got shape {shape:?}",
                if self.spatial { "spatial" } else { "normal" },
                self.features
            ));
        }
        Ok(shape[..shape.len() - 1].iter().product())
    }
}

impl<T: Real> Layer<T> for BatchNorm<T> {
    fn name(&self) -> &'static str {
        if self.spatial {
            "spatial_batch_norm"
        } else {
            "batch_norm"
        }
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        self.rows(in_shape)?;
        Ok(in_shape.to_vec())
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let rows = self.rows(x.shape())?;
        if rows < 2 {
            return Err(NnError::DegenerateBatch);
        }
        let f = self.features;
        let inv_rows = T::one() / real::<T>(rows as f64);
        let xd = x.data();

        let mut mean = alloc::vec![T::zero(); f];
        for r in 0..rows {
            for (m, &v) in mean.iter_mut().zip(&xd[r * f..(r + 1) * f]) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m * inv_rows;
        }
        // Biased (1/N) variance, the convention batch statistics use.
        let mut var = alloc::vec![T::zero(); f];
        for r in 0..rows {
            for ((vv, &v), &m) in var.iter_mut().zip(&xd[r * f..(r + 1) * f]).zip(mean.iter()) {
                let d = v - m;
                *vv = *vv + d * d;
            }
        }
        for v in &mut var {
            *v = *v * inv_rows;
        }

        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
        let mut x_hat = Tensor::zeros(&[rows, f]);
        {
            let xh = x_hat.data_mut();
            for r in 0..rows {
                for j in 0..f {
                    xh[r * f + j] = (xd[r * f + j] - mean[j]) * inv_std[j];
                }
            }
        }
        let mut y = x.clone();
        {
            let yd = y.data_mut();
            let xh = x_hat.data();
            let g = self.gamma.data();
            let bta = self.beta.data();
            for r in 0..rows {
                for j in 0..f {
                    yd[r * f + j] = g[j] * xh[r * f + j] + bta[j];
                }
            }
        }

        let mom = self.momentum;
        let one_minus = T::one() - mom;
        for ((rm, rv), (&m, &v)) in self
            .running_mean
            .data_mut()
            .iter_mut()
            .zip(self.running_var.data_mut().iter_mut())
            .zip(mean.iter().zip(var.iter()))
        {
            *rm = mom * *rm + one_minus * m;
            *rv = mom * *rv + one_minus * v;
        }

        self.cache = Some(Cache { x_hat, inv_std, in_shape: x.shape().to_vec() });
        Ok(y)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let rows = self.rows(x.shape())?;
        let f = self.features;
        let mut y = x.clone();
        let yd = y.data_mut();
        let rm = self.running_mean.data();
        let rv = self.running_var.data();
        let g = self.gamma.data();
        let bta = self.beta.data();
        for j in 0..f {
            let inv = T::one() / (rv[j] + self.eps).sqrt();
            let scale = g[j] * inv;
            let shift = bta[j] - rm[j] * scale;
            let mut r = 0;
            while r < rows {
                yd[r * f + j] = yd[r * f + j] * scale + shift;
                r += 1;
            }
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self.cache.take().ok_or_else(|| {
            NnError::Config("batch norm backward without forward".into())
        })?;
        if grad_out.shape() != cache.in_shape {
            return shape_err(format!(
                "batch norm backward expects {:?}, got {:?}",
                cache.in_shape,
                grad_out.shape()
            ));
        }
        let f = self.features;
        let rows = cache.x_hat.shape()[0];
        let n = real::<T>(rows as f64);
        let gd = grad_out.data();
        let xh = cache.x_hat.data();

        // Per-feature reductions of g and g*x_hat.
        let mut sum_g = alloc::vec![T::zero(); f];
        let mut sum_gx = alloc::vec![T::zero(); f];
        for r in 0..rows {
            for j in 0..f {
                let g = gd[r * f + j];
                sum_g[j] = sum_g[j] + g;
                sum_gx[j] = sum_gx[j] + g * xh[r * f + j];
            }
        }
        for (bg, &g) in self.beta_grad.data_mut().iter_mut().zip(sum_g.iter()) {
            *bg = *bg + g;
        }
        for (gg, &gx) in self.gamma_grad.data_mut().iter_mut().zip(sum_gx.iter()) {
            *gg = *gg + gx;
        }

        // dx = gamma * inv_std / N * (N*g - sum_g - x_hat * sum_gx)
        let mut dx = Tensor::zeros(&cache.in_shape);
        let dxd = dx.data_mut();
        let gamma = self.gamma.data();
        for r in 0..rows {
            for j in 0..f {
                let g = gd[r * f + j];
                let coeff = gamma[j] * cache.inv_std[j] / n;
                dxd[r * f + j] = coeff * (n * g - sum_g[j] - xh[r * f + j] * sum_gx[j]);
            }
        }
        Ok(dx)
    }

    fn trainable(&mut self) -> Vec<ParamGrad<'_, T>> {
        alloc::vec![
            ParamGrad { value: &mut self.gamma, grad: &mut self.gamma_grad },
            ParamGrad { value: &mut self.beta, grad: &mut self.beta_grad },
        ]
    }

    fn state(&self) -> Vec<&Tensor<T>> {
        alloc::vec![&self.gamma, &self.beta, &self.running_mean, &self.running_var]
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        alloc::vec![&mut self.gamma, &mut self.beta, &mut self.running_mean, &mut self.running_var]
    }

    fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }
}
