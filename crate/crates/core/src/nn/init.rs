//! Seeded weight initialization: He-uniform ahead of ReLU activations,
//! Glorot-uniform for recurrent and output layers.

use num_traits::Float;

use crate::rng::Rng;
use crate::tensor::{real, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    HeUniform,
    GlorotUniform,
}

pub fn init_tensor<T: Real>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    kind: Init,
    rng: &mut Rng,
) -> Tensor<T> {
    let limit = match kind {
        Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
        Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    };
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = real(rng.range_f64(-limit, limit));
    }
    t
}
