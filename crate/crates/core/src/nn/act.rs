//! Activation layers and the flatten reshape.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use super::{shape_err, Layer, NnError};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Default)]
pub struct Relu<T> {
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Relu<T> {
    pub fn new() -> Self {
        Relu { cached_input: None }
    }
}

impl<T: Real> Layer<T> for Relu<T> {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(in_shape.to_vec())
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        self.cached_input = Some(x.clone());
        Ok(self.forward_infer(x)?)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(x.map(|v| if v > T::zero() { v } else { T::zero() }))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self.cached_input.take().ok_or_else(|| {
            NnError::Config("relu backward without forward".into())
        })?;
        let mut dx = grad_out.clone();
        for (d, &v) in dx.data_mut().iter_mut().zip(x.iter()) {
            if v <= T::zero() {
                *d = T::zero();
            }
        }
        Ok(dx)
    }
}

#[derive(Default)]
pub struct Sigmoid<T> {
    cached_output: Option<Tensor<T>>,
}

impl<T: Real> Sigmoid<T> {
    pub fn new() -> Self {
        Sigmoid { cached_output: None }
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Real> Layer<T> for Sigmoid<T> {
    fn name(&self) -> &'static str {
        "sigmoid"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(in_shape.to_vec())
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let y = self.forward_infer(x)?;
        self.cached_output = Some(y.clone());
        Ok(y)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(x.map(sigmoid))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let y = self.cached_output.take().ok_or_else(|| {
            NnError::Config("sigmoid backward without forward".into())
        })?;
        let mut dx = grad_out.clone();
        for (d, &yv) in dx.data_mut().iter_mut().zip(y.iter()) {
            *d = *d * yv * (T::one() - yv);
        }
        Ok(dx)
    }
}

/// Row-wise softmax over the last axis of a (batch, k) tensor.
#[derive(Default)]
pub struct Softmax<T> {
    cached_output: Option<Tensor<T>>,
}

impl<T: Real> Softmax<T> {
    pub fn new() -> Self {
        Softmax { cached_output: None }
    }

    fn compute(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        match *x.shape() {
            [batch, k] if k >= 1 => {
                let mut y = x.clone();
                for b in 0..batch {
                    let row = y.row_mut(b);
                    let mut max = row[0];
                    for &v in row.iter() {
                        if v > max {
                            max = v;
                        }
                    }
                    let mut sum = T::zero();
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum = sum + *v;
                    }
                    for v in row.iter_mut() {
                        *v = *v / sum;
                    }
                }
                Ok(y)
            }
            _ => shape_err(format!("softmax expects (batch, k), got {:?}", x.shape())),
        }
    }
}

impl<T: Real> Layer<T> for Softmax<T> {
    fn name(&self) -> &'static str {
        "softmax"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        match *in_shape {
            [_, _] => Ok(in_shape.to_vec()),
            _ => shape_err(format!("softmax expects (batch, k), got {in_shape:?}")),
        }
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let y = self.compute(x)?;
        self.cached_output = Some(y.clone());
        Ok(y)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.compute(x)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let y = self.cached_output.take().ok_or_else(|| {
            NnError::Config("softmax backward without forward".into())
        })?;
        // dx_i = y_i * (g_i - sum_j g_j y_j), row by row.
        let (batch, k) = (y.shape()[0], y.shape()[1]);
        let mut dx = Tensor::zeros(&[batch, k]);
        for b in 0..batch {
            let yrow = y.row(b);
            let grow = grad_out.row(b);
            let mut dot = T::zero();
            for (&g, &yv) in grow.iter().zip(yrow.iter()) {
                dot = dot + g * yv;
            }
            for ((d, &g), &yv) in dx.row_mut(b).iter_mut().zip(grow.iter()).zip(yrow.iter()) {
                *d = yv * (g - dot);
            }
        }
        Ok(dx)
    }
}

/// Collapse every per-sample axis into one: (batch, ...) -> (batch, prod).
#[derive(Default)]
pub struct Flatten {
    in_shape: Vec<usize>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten { in_shape: Vec::new() }
    }
}

impl<T: Real> Layer<T> for Flatten {
    fn name(&self) -> &'static str {
        "flatten"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        if in_shape.len() < 2 {
            return shape_err(format!("flatten expects a batch axis, got {in_shape:?}"));
        }
        Ok(alloc::vec![in_shape[0], in_shape[1..].iter().product()])
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        self.in_shape = x.shape().to_vec();
        self.forward_infer(x)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let out = <Flatten as Layer<T>>::out_shape(self, x.shape())?;
        Ok(x.clone().reshaped(&out))
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        if self.in_shape.is_empty() {
            return Err(NnError::Config("flatten backward without forward".into()));
        }
        Ok(grad_out.clone().reshaped(&self.in_shape))
    }
}
