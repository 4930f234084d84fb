//! Fully-connected layer: y = x W + b.

use alloc::format;
use alloc::vec::Vec;

use super::init::{init_tensor, Init};
use super::{shape_err, Layer, NnError, ParamGrad};
use crate::rng::Rng;
use crate::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Real, Tensor};

pub struct Dense<T> {
    in_features: usize,
    units: usize,
    weights: Tensor<T>, // (in_features, units)
    bias: Tensor<T>,    // (units)
    w_grad: Tensor<T>,
    b_grad: Tensor<T>,
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Dense<T> {
    pub fn new(in_features: usize, units: usize, init: Init, rng: &mut Rng) -> Self {
        Dense {
            in_features,
            units,
            weights: init_tensor(&[in_features, units], in_features, units, init, rng),
            bias: Tensor::zeros(&[units]),
            w_grad: Tensor::zeros(&[in_features, units]),
            b_grad: Tensor::zeros(&[units]),
            cached_input: None,
        }
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize), NnError> {
        match *x.shape() {
            [batch, d] if d == self.in_features => Ok((batch, d)),
            _ => shape_err(format!(
                "dense expects (batch, {}), got {:?}",
                self.in_features,
                x.shape()
            )),
        }
    }

    fn affine(&self, x: &Tensor<T>, batch: usize) -> Tensor<T> {
        let mut out = Tensor::zeros(&[batch, self.units]);
        for b in 0..batch {
            out.row_mut(b).copy_from_slice(self.bias.data());
        }
        matmul_acc(x.data(), self.weights.data(), out.data_mut(), batch, self.in_features, self.units);
        out
    }
}

impl<T: Real> Layer<T> for Dense<T> {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        match *in_shape {
            [batch, d] if d == self.in_features => Ok(alloc::vec![batch, self.units]),
            _ => shape_err(format!(
                "dense expects (batch, {}), got {:?}",
                self.in_features, in_shape
            )),
        }
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let (batch, _) = self.check(x)?;
        self.cached_input = Some(x.clone());
        Ok(self.affine(x, batch))
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (batch, _) = self.check(x)?;
        Ok(self.affine(x, batch))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self.cached_input.take().ok_or_else(|| {
            NnError::Config("dense backward called without a cached forward pass".into())
        })?;
        let batch = x.shape()[0];
        if grad_out.shape() != [batch, self.units] {
            return shape_err(format!(
                "dense backward expects ({batch}, {}), got {:?}",
                self.units,
                grad_out.shape()
            ));
        }
        // dW += x^T g ; db += column sums of g ; dx = g W^T
        matmul_at_acc(x.data(), grad_out.data(), self.w_grad.data_mut(), batch, self.in_features, self.units);
        for b in 0..batch {
            let grow = grad_out.row(b);
            for (dbv, &gv) in self.b_grad.data_mut().iter_mut().zip(grow.iter()) {
                *dbv = *dbv + gv;
            }
        }
        let mut dx = Tensor::zeros(&[batch, self.in_features]);
        matmul_bt_acc(grad_out.data(), self.weights.data(), dx.data_mut(), batch, self.units, self.in_features);
        Ok(dx)
    }

    fn trainable(&mut self) -> Vec<ParamGrad<'_, T>> {
        alloc::vec![
            ParamGrad { value: &mut self.weights, grad: &mut self.w_grad },
            ParamGrad { value: &mut self.bias, grad: &mut self.b_grad },
        ]
    }

    fn state(&self) -> Vec<&Tensor<T>> {
        alloc::vec![&self.weights, &self.bias]
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        alloc::vec![&mut self.weights, &mut self.bias]
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}
