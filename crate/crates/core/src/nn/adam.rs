//! Adam with bias correction and per-epoch exponential learning-rate decay.

use alloc::vec::Vec;

use num_traits::Float;

use super::{NnError, ParamGrad};
use crate::tensor::{real, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Per-epoch learning-rate multiplier: lr(e) = lr0 * decay^e.
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr0: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, decay: 0.95 }
    }
}

impl AdamConfig {
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi(epoch as i32)
    }
}

/// Optimizer state: first/second moment accumulators per parameter tensor,
/// the step counter and the current learning rate.
pub struct Adam<T> {
    config: AdamConfig,
    lr: T,
    step: u64,
    moments: Vec<(Tensor<T>, Tensor<T>)>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam { lr: real(config.lr0), config, step: 0, moments: Vec::new() }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn current_lr(&self) -> T {
        self.lr
    }

    /// Anneal the learning rate for the given epoch.
    pub fn begin_epoch(&mut self, epoch: usize) {
        self.lr = real(self.config.lr_at_epoch(epoch));
    }

    /// One update over the flattened parameter list. The list must have the
    /// same arity and shapes on every call. Gradients are consumed (zeroed).
    pub fn step(&mut self, params: &mut [ParamGrad<'_, T>]) -> Result<(), NnError> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())))
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(NnError::Config("optimizer state does not match parameter list".into()));
        }
        self.step += 1;
        let b1 = real::<T>(self.config.beta1);
        let b2 = real::<T>(self.config.beta2);
        let eps = real::<T>(self.config.eps);
        let one = T::one();
        // Bias correction at step t.
        let corr1 = one - real::<T>(self.config.beta1.powi(self.step as i32));
        let corr2 = one - real::<T>(self.config.beta2.powi(self.step as i32));
        for (param, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            let g_all = param.grad.data();
            if g_all.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient);
            }
            let md = m.data_mut();
            let vd = v.data_mut();
            let pd = param.value.data_mut();
            for i in 0..pd.len() {
                let g = g_all[i];
                md[i] = b1 * md[i] + (one - b1) * g;
                vd[i] = b2 * vd[i] + (one - b2) * g * g;
                let m_hat = md[i] / corr1;
                let v_hat = vd[i] / corr2;
                pd[i] = pd[i] - self.lr * m_hat / (v_hat.sqrt() + eps);
            }
            param.grad.fill(T::zero());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_param(value: f64) -> (Tensor<f64>, Tensor<f64>) {
        (Tensor::scalar(value), Tensor::scalar(0.0))
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut adam: Adam<f64> = Adam::new(AdamConfig::default());
        let (mut p, mut g) = one_param(1.5);
        for _ in 0..5 {
            adam.step(&mut [ParamGrad { value: &mut p, grad: &mut g }]).unwrap();
        }
        assert_eq!(p.data()[0], 1.5);
    }

    #[test]
    fn first_step_moves_by_about_the_learning_rate() {
        // With bias correction, m_hat = g and v_hat = g^2 on step one, so
        // the update is lr * g / (|g| + eps) ~ lr.
        let mut adam: Adam<f64> = Adam::new(AdamConfig { lr0: 1e-3, ..AdamConfig::default() });
        let (mut p, mut g) = one_param(0.0);
        g.data_mut()[0] = 1.0;
        adam.step(&mut [ParamGrad { value: &mut p, grad: &mut g }]).unwrap();
        assert!((p.data()[0] + 1e-3).abs() < 1e-8, "got {}", p.data()[0]);
        // Gradient buffer is consumed.
        assert_eq!(g.data()[0], 0.0);
    }

    #[test]
    fn decay_schedule_is_exponential_per_epoch() {
        let cfg = AdamConfig { lr0: 0.01, decay: 0.95, ..AdamConfig::default() };
        let mut adam: Adam<f64> = Adam::new(cfg);
        adam.begin_epoch(10);
        let want = 0.01 * 0.95f64.powi(10);
        assert!((adam.current_lr() - want).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut adam: Adam<f64> = Adam::new(AdamConfig::default());
        let (mut p, mut g) = one_param(0.0);
        g.data_mut()[0] = f64::NAN;
        let err = adam.step(&mut [ParamGrad { value: &mut p, grad: &mut g }]);
        assert_eq!(err, Err(NnError::NonFiniteGradient));
    }

    #[test]
    fn adapts_step_size_to_gradient_scale() {
        // Two parameters with very different gradient magnitudes receive
        // comparable effective steps.
        let mut adam: Adam<f64> = Adam::new(AdamConfig::default());
        let (mut p1, mut g1) = one_param(0.0);
        let (mut p2, mut g2) = one_param(0.0);
        for _ in 0..10 {
            g1.data_mut()[0] = 100.0;
            g2.data_mut()[0] = 0.01;
            adam.step(&mut [
                ParamGrad { value: &mut p1, grad: &mut g1 },
                ParamGrad { value: &mut p2, grad: &mut g2 },
            ])
            .unwrap();
        }
        let ratio = p1.data()[0] / p2.data()[0];
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }
}
