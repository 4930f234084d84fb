//! Minimal neural-network engine: tensors in, explicit forward and backward
//! passes out. Layers cache what their backward pass needs; the optimizer
//! walks flattened (parameter, gradient) pairs. Everything is generic over
//! the scalar so training runs in f32 while gradient verification runs the
//! identical code in f64.

mod act;
mod adam;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
pub mod init;
mod loss;
mod lstm;
mod net;
mod norm;
mod pool;
mod train;

pub use act::{Flatten, Relu, Sigmoid, Softmax};
pub use adam::{Adam, AdamConfig};
pub use conv::Conv1d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use loss::{bce_loss, cce_loss, LossKind};
pub use lstm::Lstm;
pub use net::{LayerSummary, Network};
pub use norm::BatchNorm;
pub use pool::MaxPool1d;
pub use train::{accuracy, EpochStats, TrainConfig, TrainData, TrainedModel};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    /// Tensor shape incompatible with the layer.
    Shape(String),
    /// Mini-batch too small for batch statistics in train mode.
    DegenerateBatch,
    /// Ill-formed layer stack or hyperparameters.
    Config(String),
    /// A gradient went NaN or infinite.
    NonFiniteGradient,
    /// Training loss became non-finite at this epoch.
    Diverged { epoch: usize },
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::Shape(msg) => write!(f, "shape error: {msg}"),
            NnError::DegenerateBatch => {
                write!(f, "batch normalization needs at least 2 rows in train mode")
            }
            NnError::Config(msg) => write!(f, "model configuration error: {msg}"),
            NnError::NonFiniteGradient => write!(f, "non-finite gradient"),
            NnError::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
        }
    }
}

impl core::error::Error for NnError {}

/// Declarative description of one layer; a stack of these plus an input
/// shape fully determines a network.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize },
    MaxPool1d { pool: usize },
    Lstm { units: usize, return_sequences: bool },
    Dense { units: usize },
    BatchNorm,
    SpatialBatchNorm,
    Dropout { rate: f64 },
    Relu,
    Sigmoid,
    Softmax,
    Flatten,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = match *self {
            LayerSpec::Conv1d { filters, kernel } => filters > 0 && kernel > 0,
            LayerSpec::MaxPool1d { pool } => pool > 0,
            LayerSpec::Lstm { units, .. } => units > 0,
            LayerSpec::Dense { units } => units > 0,
            LayerSpec::Dropout { rate } => (0.0..1.0).contains(&rate),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(alloc::format!("invalid hyperparameters in {self:?}")))
        }
    }
}

/// A trainable parameter and its gradient accumulator.
pub struct ParamGrad<'a, T> {
    pub value: &'a mut Tensor<T>,
    pub grad: &'a mut Tensor<T>,
}

/// One layer with explicit forward and backward passes.
///
/// `forward_train` may cache activations for `backward` and may consume
/// randomness; `forward_infer` is pure and uses running statistics where
/// applicable. `backward` consumes the most recent `forward_train` cache,
/// accumulates parameter gradients internally, and returns the gradient
/// with respect to its input.
pub trait Layer<T: Real> {
    fn name(&self) -> &'static str;
    /// Output shape for a full (batch-leading) input shape.
    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError>;
    fn forward_train(&mut self, x: &Tensor<T>, rng: &mut Rng) -> Result<Tensor<T>, NnError>;
    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError>;
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError>;
    /// Trainable (parameter, gradient) pairs; empty for stateless layers.
    fn trainable(&mut self) -> Vec<ParamGrad<'_, T>> {
        Vec::new()
    }
    /// All persistent tensors (parameters plus running statistics) in a
    /// stable order, for checkpointing.
    fn state(&self) -> Vec<&Tensor<T>> {
        Vec::new()
    }
    fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        Vec::new()
    }
    /// Trainable scalar count, for the model summary.
    fn param_count(&self) -> usize {
        0
    }
}

pub(crate) fn shape_err<T>(msg: alloc::string::String) -> Result<T, NnError> {
    Err(NnError::Shape(msg))
}
