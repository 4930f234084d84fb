//! 1-D convolution, stride 1, "same" zero padding.

use alloc::format;
use alloc::vec::Vec;

use super::init::{init_tensor, Init};
use super::{shape_err, Layer, NnError, ParamGrad};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

pub struct Conv1d<T> {
    in_channels: usize,
    filters: usize,
    kernel: usize,
    pad_left: usize,
    weights: Tensor<T>, // (kernel, in_channels, filters)
    bias: Tensor<T>,    // (filters)
    w_grad: Tensor<T>,
    b_grad: Tensor<T>,
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Conv1d<T> {
    pub fn new(in_channels: usize, filters: usize, kernel: usize, init: Init, rng: &mut Rng) -> Self {
        let fan_in = kernel * in_channels;
        let fan_out = kernel * filters;
        Conv1d {
            in_channels,
            filters,
            kernel,
            pad_left: (kernel - 1) / 2,
            weights: init_tensor(&[kernel, in_channels, filters], fan_in, fan_out, init, rng),
            bias: Tensor::zeros(&[filters]),
            w_grad: Tensor::zeros(&[kernel, in_channels, filters]),
            b_grad: Tensor::zeros(&[filters]),
            cached_input: None,
        }
    }

    /// Test hook: install explicit weights (kernel, in_channels, filters).
    pub fn set_weights(&mut self, weights: Tensor<T>, bias: Tensor<T>) {
        assert_eq!(weights.shape(), &[self.kernel, self.in_channels, self.filters]);
        assert_eq!(bias.shape(), &[self.filters]);
        self.weights = weights;
        self.bias = bias;
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize), NnError> {
        match *x.shape() {
            // With "same" padding the padded length is length + kernel - 1,
            // so any non-empty input admits the kernel.
            [batch, length, ch] if ch == self.in_channels && length >= 1 => Ok((batch, length)),
            _ => shape_err(format!(
                "conv1d expects (batch, length>=1, {}), got {:?}",
                self.in_channels,
                x.shape()
            )),
        }
    }

    /// out[b, t, f] = bias[f] + sum_{k, c} w[k, c, f] * x[b, t + k - pad, c]
    fn convolve(&self, x: &Tensor<T>, batch: usize, length: usize) -> Tensor<T> {
        let (cin, nf, kn) = (self.in_channels, self.filters, self.kernel);
        let mut out = Tensor::zeros(&[batch, length, nf]);
        let xd = x.data();
        let od = out.data_mut();
        let wd = self.weights.data();
        for b in 0..batch {
            let xoff = b * length * cin;
            let ooff = b * length * nf;
            for t in 0..length {
                let orow = &mut od[ooff + t * nf..ooff + (t + 1) * nf];
                orow.copy_from_slice(self.bias.data());
                for k in 0..kn {
                    let src = t + k;
                    if src < self.pad_left || src - self.pad_left >= length {
                        continue;
                    }
                    let xrow = &xd[xoff + (src - self.pad_left) * cin..xoff + (src - self.pad_left + 1) * cin];
                    let wk = &wd[k * cin * nf..(k + 1) * cin * nf];
                    for (c, &xv) in xrow.iter().enumerate() {
                        let wrow = &wk[c * nf..(c + 1) * nf];
                        for (ov, &wv) in orow.iter_mut().zip(wrow.iter()) {
                            *ov = *ov + xv * wv;
                        }
                    }
                }
            }
        }
        out
    }
}

impl<T: Real> Layer<T> for Conv1d<T> {
    fn name(&self) -> &'static str {
        "conv1d"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        match *in_shape {
            [batch, length, ch] if ch == self.in_channels => {
                Ok(alloc::vec![batch, length, self.filters])
            }
            _ => shape_err(format!(
                "conv1d expects (batch, length, {}), got {:?}",
                self.in_channels, in_shape
            )),
        }
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let (batch, length) = self.check(x)?;
        self.cached_input = Some(x.clone());
        Ok(self.convolve(x, batch, length))
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (batch, length) = self.check(x)?;
        Ok(self.convolve(x, batch, length))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self.cached_input.take().ok_or_else(|| {
            NnError::Config("conv1d backward called without a cached forward pass".into())
        })?;
        let (batch, length) = (x.shape()[0], x.shape()[1]);
        let (cin, nf, kn) = (self.in_channels, self.filters, self.kernel);
        if grad_out.shape() != [batch, length, nf] {
            return shape_err(format!(
                "conv1d backward expects ({batch}, {length}, {nf}), got {:?}",
                grad_out.shape()
            ));
        }
        let mut dx = Tensor::zeros(&[batch, length, cin]);
        let gd = grad_out.data();
        let xd = x.data();
        let wd = self.weights.data();
        let dwd = self.w_grad.data_mut();
        let dxd = dx.data_mut();
        for b in 0..batch {
            let goff = b * length * nf;
            let xoff = b * length * cin;
            for t in 0..length {
                let grow = &gd[goff + t * nf..goff + (t + 1) * nf];
                for (dbv, &gv) in self.b_grad.data_mut().iter_mut().zip(grow.iter()) {
                    *dbv = *dbv + gv;
                }
                for k in 0..kn {
                    let src = t + k;
                    if src < self.pad_left || src - self.pad_left >= length {
                        continue;
                    }
                    let s = src - self.pad_left;
                    let xrow = &xd[xoff + s * cin..xoff + (s + 1) * cin];
                    let dxrow = &mut dxd[xoff + s * cin..xoff + (s + 1) * cin];
                    let wk = &wd[k * cin * nf..(k + 1) * cin * nf];
                    let dwk = &mut dwd[k * cin * nf..(k + 1) * cin * nf];
                    for c in 0..cin {
                        let wrow = &wk[c * nf..(c + 1) * nf];
                        let dwrow = &mut dwk[c * nf..(c + 1) * nf];
                        let xv = xrow[c];
                        let mut acc = T::zero();
                        for ((&gv, &wv), dwv) in grow.iter().zip(wrow.iter()).zip(dwrow.iter_mut()) {
                            acc = acc + gv * wv;
                            *dwv = *dwv + gv * xv;
                        }
                        dxrow[c] = dxrow[c] + acc;
                    }
                }
            }
        }
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
