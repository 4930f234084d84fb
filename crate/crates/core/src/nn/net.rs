//! Network assembly: turn a `LayerSpec` stack plus an input shape into an
//! initialized layer pipeline with shape inference.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::init::Init;
use super::{
    Conv1d, Dense, Dropout, Flatten, Layer, LayerSpec, Lstm, MaxPool1d, NnError, ParamGrad, Relu,
    Sigmoid, Softmax,
};
use super::norm::BatchNorm;
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

pub struct Network<T: Real> {
    layers: Vec<Box<dyn Layer<T>>>,
    specs: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

/// One line of the human-readable model summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSummary {
    pub name: &'static str,
    pub output_shape: Vec<usize>,
    pub param_count: usize,
}

/// Weight init for a conv or dense layer: He ahead of a ReLU, Glorot
/// otherwise (output heads and anything feeding a saturating activation).
fn init_for_position(specs: &[LayerSpec], idx: usize) -> Init {
    for spec in &specs[idx + 1..] {
        match spec {
            LayerSpec::Relu => return Init::HeUniform,
            LayerSpec::Sigmoid | LayerSpec::Softmax => return Init::GlorotUniform,
            // Normalization and regularization sit between the affine map
            // and its activation; keep scanning.
            LayerSpec::BatchNorm | LayerSpec::SpatialBatchNorm | LayerSpec::Dropout { .. } => {}
            _ => break,
        }
    }
    Init::GlorotUniform
}

impl<T: Real> Network<T> {
    /// Build and initialize a network. `input_shape` is the per-sample
    /// shape (without the batch axis).
    pub fn build(specs: &[LayerSpec], input_shape: &[usize], rng: &mut Rng) -> Result<Self, NnError> {
        if specs.is_empty() {
            return Err(NnError::Config("a network needs at least one layer".into()));
        }
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(NnError::Config(format!("bad input shape {input_shape:?}")));
        }
        // Shape inference runs with a probe batch axis of 2.
        let mut shape: Vec<usize> = core::iter::once(2).chain(input_shape.iter().copied()).collect();
        let mut layers: Vec<Box<dyn Layer<T>>> = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let layer: Box<dyn Layer<T>> = match *spec {
                LayerSpec::Conv1d { filters, kernel } => {
                    let channels = match *shape.as_slice() {
                        [_, _, ch] => ch,
                        _ => {
                            return Err(NnError::Config(format!(
                                "conv1d needs (length, channels) input, layer {idx} sees {:?}",
                                &shape[1..]
                            )))
                        }
                    };
                    Box::new(Conv1d::new(channels, filters, kernel, init_for_position(specs, idx), rng))
                }
                LayerSpec::MaxPool1d { pool } => Box::new(MaxPool1d::new(pool)),
                LayerSpec::Lstm { units, return_sequences } => {
                    let feats = match *shape.as_slice() {
                        [_, _, f] => f,
                        _ => {
                            return Err(NnError::Config(format!(
                                "lstm needs (steps, features) input, layer {idx} sees {:?}",
                                &shape[1..]
                            )))
                        }
                    };
                    Box::new(Lstm::new(feats, units, return_sequences, Init::GlorotUniform, rng))
                }
                LayerSpec::Dense { units } => {
                    let feats = match *shape.as_slice() {
                        [_, f] => f,
                        _ => {
                            return Err(NnError::Config(format!(
                                "dense needs flat input, layer {idx} sees {:?}",
                                &shape[1..]
                            )))
                        }
                    };
                    Box::new(Dense::new(feats, units, init_for_position(specs, idx), rng))
                }
                LayerSpec::BatchNorm => {
                    let feats = match *shape.as_slice() {
                        [_, f] => f,
                        _ => {
                            return Err(NnError::Config(format!(
                                "batch norm needs flat input, layer {idx} sees {:?}",
                                &shape[1..]
                            )))
                        }
                    };
                    Box::new(BatchNorm::new(feats, false))
                }
                LayerSpec::SpatialBatchNorm => {
                    let ch = match *shape.as_slice() {
                        [_, _, ch] => ch,
                        _ => {
                            return Err(NnError::Config(format!(
                                "spatial batch norm needs (length, channels) input, layer {idx} sees {:?}",
                                &shape[1..]
                            )))
                        }
                    };
                    Box::new(BatchNorm::new(ch, true))
                }
                LayerSpec::Dropout { rate } => Box::new(Dropout::new(rate)),
                LayerSpec::Relu => Box::new(Relu::new()),
                LayerSpec::Sigmoid => Box::new(Sigmoid::new()),
                LayerSpec::Softmax => Box::new(Softmax::new()),
                LayerSpec::Flatten => Box::new(Flatten::new()),
            };
            shape = layer.out_shape(&shape)?;
            layers.push(layer);
        }
        Ok(Network {
            layers,
            specs: specs.to_vec(),
            input_shape: input_shape.to_vec(),
            output_shape: shape[1..].to_vec(),
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape.
    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    fn batched_shape(&self, batch: usize) -> Vec<usize> {
        core::iter::once(batch).chain(self.input_shape.iter().copied()).collect()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape {
            return Err(NnError::Shape(format!(
                "network expects (batch, {:?}), got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Training-mode forward pass; caches are kept for `backward`.
    pub fn forward_train(&mut self, x: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward_train(&cur, rng)?;
        }
        Ok(cur)
    }

    /// Inference: pure in the parameters, no caching, no randomness.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward_infer(&cur)?;
        }
        Ok(cur)
    }

    /// Reshape a flat (batch, d) matrix into the network's input layout and
    /// run inference.
    pub fn predict_flat(&self, rows: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let d: usize = self.input_shape.iter().product();
        match *rows.shape() {
            [batch, got] if got == d => self.predict(&rows.clone().reshaped(&self.batched_shape(batch))),
            _ => Err(NnError::Shape(format!(
                "expected (batch, {d}) rows, got {:?}",
                rows.shape()
            ))),
        }
    }

    /// Backpropagate the loss gradient; parameter gradients accumulate in
    /// the layers until the next optimizer step. Returns the gradient with
    /// respect to the network input.
    pub fn backward(&mut self, loss_grad: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut grad = loss_grad.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    pub fn trainable_params(&mut self) -> Vec<ParamGrad<'_, T>> {
        self.layers.iter_mut().flat_map(|l| l.trainable()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.trainable_params() {
            p.grad.fill(T::zero());
        }
    }

    /// All persistent tensors (parameters and running statistics) in layer
    /// order, for checkpointing.
    pub fn state_tensors(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.state()).collect()
    }

    /// Load persistent tensors saved by `state_tensors`.
    pub fn load_state(&mut self, tensors: &[Tensor<T>]) -> Result<(), NnError> {
        let mut slots: Vec<&mut Tensor<T>> =
            self.layers.iter_mut().flat_map(|l| l.state_mut()).collect();
        if slots.len() != tensors.len() {
            return Err(NnError::Config(format!(
                "checkpoint holds {} tensors, model needs {}",
                tensors.len(),
                slots.len()
            )));
        }
        for (slot, t) in slots.iter_mut().zip(tensors.iter()) {
            if slot.shape() != t.shape() {
                return Err(NnError::Shape(format!(
                    "checkpoint tensor shape {:?} does not match model slot {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            **slot = t.clone();
        }
        Ok(())
    }

    /// Layer-by-layer output shapes and parameter counts.
    pub fn summary(&self) -> Vec<LayerSummary> {
        let mut shape = self.batched_shape(1);
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.out_shape(&shape).expect("shapes were validated at build time");
            out.push(LayerSummary {
                name: layer.name(),
                output_shape: shape[1..].to_vec(),
                param_count: layer.param_count(),
            });
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Render the summary as an aligned text table.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        s.push_str("layer                output shape         params\n");
        for line in self.summary() {
            s.push_str(&format!(
                "{:<20} {:<20} {}\n",
                line.name,
                format!("{:?}", line.output_shape),
                line.param_count
            ));
        }
        s.push_str(&format!("total parameters: {}\n", self.param_count()));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny_specs() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv1d { filters: 4, kernel: 3 },
            LayerSpec::SpatialBatchNorm,
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { pool: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 3 },
            LayerSpec::Sigmoid,
        ]
    }

    #[test]
    fn builds_and_infers_shapes() {
        let net: Network<f64> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(1)).unwrap();
        assert_eq!(net.output_shape(), &[3]);
        let x = Tensor::filled(&[5, 8, 1], 0.5);
        let y = net.predict(&x).unwrap();
        assert_eq!(y.shape(), &[5, 3]);
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn bad_stack_is_a_config_error() {
        // Dense cannot consume a 3-axis tensor without a flatten.
        let specs = vec![LayerSpec::Conv1d { filters: 2, kernel: 3 }, LayerSpec::Dense { units: 2 }];
        let err = Network::<f64>::build(&specs, &[8, 1], &mut Rng::new(0));
        assert!(matches!(err, Err(NnError::Config(_))));
    }

    #[test]
    fn same_seed_builds_identical_parameters() {
        let a: Network<f32> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(7)).unwrap();
        let b: Network<f32> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(7)).unwrap();
        let at = a.state_tensors();
        let bt = b.state_tensors();
        assert_eq!(at.len(), bt.len());
        for (x, y) in at.iter().zip(bt.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn state_round_trips_through_load() {
        let a: Network<f64> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(3)).unwrap();
        let mut b: Network<f64> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(4)).unwrap();
        let saved: Vec<Tensor<f64>> = a.state_tensors().into_iter().cloned().collect();
        b.load_state(&saved).unwrap();
        let x = Tensor::filled(&[2, 8, 1], 0.25);
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());
    }

    #[test]
    fn inference_is_repeatable() {
        let net: Network<f64> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(5)).unwrap();
        let x = Tensor::from_vec(&[3, 8, 1], (0..24).map(|v| f64::from(v) / 24.0).collect());
        assert_eq!(net.predict(&x).unwrap(), net.predict(&x).unwrap());
    }

    #[test]
    fn summary_reports_shapes_and_counts() {
        let net: Network<f64> = Network::build(&tiny_specs(), &[8, 1], &mut Rng::new(1)).unwrap();
        let summary = net.summary();
        assert_eq!(summary[0].name, "conv1d");
        assert_eq!(summary[0].output_shape, vec![8, 4]);
        assert_eq!(summary[0].param_count, 3 * 1 * 4 + 4);
        assert_eq!(summary[3].output_shape, vec![4, 4]);
        assert_eq!(summary[4].output_shape, vec![16]);
        let dense = &summary[5];
        assert_eq!(dense.param_count, 16 * 3 + 3);
    }
}
