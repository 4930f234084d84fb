//! Mini-batch training loop with seed-deterministic shuffling, dropout and
//! initialization, per-epoch learning-rate annealing and loss/accuracy
//! history.

use alloc::format;
use alloc::vec::Vec;

use super::{Adam, AdamConfig, LayerSpec, LossKind, Network, NnError};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, batch_size: 128, seed: 0, adam: AdamConfig::default() }
    }
}

/// Flat training rows: one sample per row, labels as class ids.
#[derive(Clone, Copy)]
pub struct TrainData<'a, T> {
    pub inputs: &'a Tensor<T>,
    pub labels: &'a [u16],
}

impl<'a, T: Real> TrainData<'a, T> {
    pub fn new(inputs: &'a Tensor<T>, labels: &'a [u16]) -> Self {
        TrainData { inputs, labels }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn check(&self, row_len: usize) -> Result<(), NnError> {
        match *self.inputs.shape() {
            [n, d] if n == self.labels.len() && d == row_len => Ok(()),
            _ => Err(NnError::Shape(format!(
                "expected ({}, {row_len}) inputs, got {:?}",
                self.labels.len(),
                self.inputs.shape()
            ))),
        }
    }
}

/// Loss and accuracy per epoch, on the training and validation splits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

/// A trained network plus everything needed to reproduce and apply it.
pub struct TrainedModel<T: Real> {
    pub network: Network<T>,
    pub loss: LossKind,
    pub seed: u64,
    pub history: Vec<EpochStats>,
}

impl<T: Real> TrainedModel<T> {
    pub fn specs(&self) -> &[LayerSpec] {
        self.network.specs()
    }

    /// Score flat (N, d) rows in inference mode, batched to bound memory.
    pub fn predict_scores(&self, inputs: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let n = inputs.shape()[0];
        let out_len: usize = self.network.output_shape().iter().product();
        let mut data = Vec::with_capacity(n * out_len);
        let chunk = 256;
        let row_len: usize = inputs.shape()[1..].iter().product();
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let rows = Tensor::from_vec(
                &[end - start, row_len],
                inputs.data()[start * row_len..end * row_len].to_vec(),
            );
            let scores = self.network.predict_flat(&rows)?;
            data.extend_from_slice(scores.data());
            start = end;
        }
        Ok(Tensor::from_vec(&[n, out_len], data))
    }

    /// Hard class decisions: 0.5 threshold for the binary head, argmax for
    /// the softmax head (ties to the lowest class index).
    pub fn predict_classes(&self, inputs: &Tensor<T>) -> Result<Vec<u16>, NnError> {
        let scores = self.predict_scores(inputs)?;
        Ok(decide(&scores, self.loss))
    }
}

/// Turn head scores into class decisions.
pub fn decide<T: Real>(scores: &Tensor<T>, loss: LossKind) -> Vec<u16> {
    let (n, k) = (scores.shape()[0], scores.shape()[1]);
    let half = crate::tensor::real::<T>(0.5);
    (0..n)
        .map(|i| match loss {
            LossKind::Bce => u16::from(scores.data()[i * k] >= half),
            LossKind::Cce => {
                let row = &scores.data()[i * k..(i + 1) * k];
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best as u16
            }
        })
        .collect()
}

/// Fraction of correct decisions.
pub fn accuracy<T: Real>(scores: &Tensor<T>, labels: &[u16], loss: LossKind) -> f64 {
    let decisions = decide(scores, loss);
    let hits = decisions.iter().zip(labels.iter()).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Check the head arity against the label range.
fn check_head<T: Real>(net: &Network<T>, loss: LossKind, labels: &[u16]) -> Result<(), NnError> {
    let out: usize = net.output_shape().iter().product();
    let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
    match loss {
        LossKind::Bce if out == 1 && max_label <= 1 => Ok(()),
        LossKind::Cce if out >= 2 && max_label < out => Ok(()),
        _ => Err(NnError::Config(format!(
            "head of arity {out} cannot consume labels up to {max_label} with {loss:?}"
        ))),
    }
}

/// Average loss and accuracy of a model over flat rows, inference mode.
pub fn evaluate<T: Real>(
    net: &Network<T>,
    loss: LossKind,
    data: TrainData<'_, T>,
    batch_size: usize,
) -> Result<(f64, f64), NnError> {
    let n = data.len();
    let row_len: usize = data.inputs.shape()[1..].iter().product();
    let mut loss_sum = 0.0;
    let mut hit_sum = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + batch_size).min(n);
        let rows = Tensor::from_vec(
            &[end - start, row_len],
            data.inputs.data()[start * row_len..end * row_len].to_vec(),
        );
        let scores = net.predict_flat(&rows)?;
        let (l, _) = loss.compute(&scores, &data.labels[start..end])?;
        loss_sum += l.to_f64() * (end - start) as f64;
        hit_sum += accuracy(&scores, &data.labels[start..end], loss) * (end - start) as f64;
        start = end;
    }
    Ok((loss_sum / n as f64, hit_sum / n as f64))
}

/// Train a layer stack on flat rows.
///
/// Deterministic given `config.seed`: initialization, shuffling and dropout
/// masks each draw from a labeled sub-stream of the seed. Mini-batches of
/// fewer than 2 samples at the tail of an epoch are skipped so batch
/// statistics stay defined.
pub fn train<T: Real>(
    specs: &[LayerSpec],
    input_shape: &[usize],
    loss: LossKind,
    data: TrainData<'_, T>,
    validation: Option<TrainData<'_, T>>,
    config: &TrainConfig,
) -> Result<TrainedModel<T>, NnError> {
    if config.epochs == 0 || config.batch_size < 2 {
        return Err(NnError::Config("need at least 1 epoch and a batch size of 2".into()));
    }
    let row_len: usize = input_shape.iter().product();
    data.check(row_len)?;
    if let Some(v) = &validation {
        v.check(row_len)?;
    }

    let mut init_rng = Rng::labeled(config.seed, "init");
    let mut net = Network::build(specs, input_shape, &mut init_rng)?;
    check_head(&net, loss, data.labels)?;

    let mut shuffle_rng = Rng::labeled(config.seed, "shuffle");
    let mut dropout_rng = Rng::labeled(config.seed, "dropout");
    let mut adam: Adam<T> = Adam::new(config.adam);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        adam.begin_epoch(epoch);
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hit_sum = 0.0;
        let mut seen = 0usize;
        let mut start = 0;
        while start < n {
            let end = (start + config.batch_size).min(n);
            if end - start < 2 {
                break;
            }
            let batch_idx = &order[start..end];
            let mut rows = Vec::with_capacity((end - start) * row_len);
            let mut labels = Vec::with_capacity(end - start);
            for &i in batch_idx {
                rows.extend_from_slice(&data.inputs.data()[i * row_len..(i + 1) * row_len]);
                labels.push(data.labels[i]);
            }
            let shape: Vec<usize> =
                core::iter::once(end - start).chain(input_shape.iter().copied()).collect();
            let x = Tensor::from_vec(&shape, rows);

            let scores = net.forward_train(&x, &mut dropout_rng)?;
            let (batch_loss, grad) = loss.compute(&scores, &labels)?;
            if !batch_loss.is_finite() {
                return Err(NnError::Diverged { epoch });
            }
            net.backward(&grad)?;
            let mut params = net.trainable_params();
            adam.step(&mut params)?;

            loss_sum += batch_loss.to_f64() * (end - start) as f64;
            hit_sum += accuracy(&scores, &labels, loss) * (end - start) as f64;
            seen += end - start;
            start = end;
        }
        if seen == 0 {
            return Err(NnError::Config("no trainable mini-batch of size >= 2".into()));
        }
        let (val_loss, val_acc) = match &validation {
            Some(v) => {
                let (l, a) = evaluate(&net, loss, *v, config.batch_size)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_acc: hit_sum / seen as f64,
            val_loss,
            val_acc,
        });
    }

    Ok(TrainedModel { network: net, loss, seed: config.seed, history })
}
