//! Binary and categorical cross-entropy with probability clamping.

use num_traits::Float;

use crate::tensor::{real, Real, Tensor};

use super::{shape_err, NnError};

const CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossKind {
    /// Binary cross-entropy over a (batch, 1) probability column.
    Bce,
    /// Categorical cross-entropy over (batch, k) probability rows.
    Cce,
}

impl LossKind {
    pub fn compute<T: Real>(
        &self,
        probs: &Tensor<T>,
        targets: &[u16],
    ) -> Result<(T, Tensor<T>), NnError> {
        match self {
            LossKind::Bce => bce_loss(probs, targets),
            LossKind::Cce => cce_loss(probs, targets),
        }
    }
}

#[inline]
fn clamp<T: Real>(p: T) -> T {
    let lo = real::<T>(CLAMP_EPS);
    let hi = T::one() - lo;
    if p < lo {
        lo
    } else if p > hi {
        hi
    } else {
        p
    }
}

/// loss = -mean(y ln p + (1-y) ln(1-p)); also returns dloss/dp.
pub fn bce_loss<T: Real>(probs: &Tensor<T>, targets: &[u16]) -> Result<(T, Tensor<T>), NnError> {
    match *probs.shape() {
        [batch, 1] if batch == targets.len() && batch > 0 => {
            let inv_n = T::one() / real::<T>(batch as f64);
            let mut grad = Tensor::zeros(&[batch, 1]);
            let mut loss = T::zero();
            for (i, (&p_raw, g)) in probs.iter().zip(grad.data_mut().iter_mut()).enumerate() {
                let p = clamp(p_raw);
                if targets[i] != 0 {
                    loss = loss - p.ln();
                    *g = -inv_n / p;
                } else {
                    loss = loss - (T::one() - p).ln();
                    *g = inv_n / (T::one() - p);
                }
            }
            Ok((loss * inv_n, grad))
        }
        _ => shape_err(alloc::format!(
            "bce expects (batch, 1) probabilities matching {} targets, got {:?}",
            targets.len(),
            probs.shape()
        )),
    }
}

/// loss = -mean(ln p[target]); also returns dloss/dp.
pub fn cce_loss<T: Real>(probs: &Tensor<T>, targets: &[u16]) -> Result<(T, Tensor<T>), NnError> {
    match *probs.shape() {
        [batch, k] if batch == targets.len() && batch > 0 && k >= 2 => {
            let inv_n = T::one() / real::<T>(batch as f64);
            let mut grad = Tensor::zeros(&[batch, k]);
            let mut loss = T::zero();
            for (i, &t) in targets.iter().enumerate() {
                let t = t as usize;
                if t >= k {
                    return shape_err(alloc::format!("target class {t} out of range for k={k}"));
                }
                let p = clamp(probs.data()[i * k + t]);
                loss = loss - p.ln();
                grad.data_mut()[i * k + t] = -inv_n / p;
            }
            Ok((loss * inv_n, grad))
        }
        _ => shape_err(alloc::format!(
            "cce expects (batch, k>=2) probabilities matching {} targets, got {:?}",
            targets.len(),
            probs.shape()
        )),
    }
}
