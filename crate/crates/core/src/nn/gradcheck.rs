//! Finite-difference gradient verification.
//!
//! The harness drives a network through a scalar probe loss
//! L = sum(forward(x) * probe) and compares the analytic backward pass
//! against central differences. The numeric side only ever calls the
//! forward pass, so it stays independent of the gradient code it checks.
//! Run it on an f64 network; 32-bit rounding would drown the comparison.

use alloc::vec::Vec;

use super::{LayerSpec, Network, NnError};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Outcome of one gradient check: worst relative error over all input and
/// parameter elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub elements_checked: usize,
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Scalar probe loss of one training-mode forward pass. `forward_seed`
/// fixes the dropout stream so every evaluation sees identical masks.
fn probe_loss(
    net: &mut Network<f64>,
    x: &Tensor<f64>,
    probe: &Tensor<f64>,
    forward_seed: u64,
) -> Result<f64, NnError> {
    let mut rng = Rng::new(forward_seed);
    let y = net.forward_train(x, &mut rng)?;
    Ok(y.iter().zip(probe.iter()).map(|(&a, &b)| a * b).sum())
}

/// Check analytic gradients of a spec stack against central differences.
///
/// Checks both d/d(input) and d/d(parameters) of the probe loss with step
/// `eps` and returns the worst relative error; `Err` only for shape or
/// configuration problems.
pub fn check_specs(
    specs: &[LayerSpec],
    input_shape: &[usize],
    batch: usize,
    seed: u64,
    eps: f64,
) -> Result<GradCheckReport, NnError> {
    let mut init_rng = Rng::labeled(seed, "gradcheck/init");
    let mut net: Network<f64> = Network::build(specs, input_shape, &mut init_rng)?;

    let mut data_rng = Rng::labeled(seed, "gradcheck/data");
    let full_shape: Vec<usize> = core::iter::once(batch).chain(input_shape.iter().copied()).collect();
    let mut x = Tensor::<f64>::zeros(&full_shape);
    for v in x.data_mut() {
        *v = data_rng.range_f64(-1.0, 1.0);
    }

    let out_shape: Vec<usize> =
        core::iter::once(batch).chain(net.output_shape().iter().copied()).collect();
    let mut probe = Tensor::<f64>::zeros(&out_shape);
    for v in probe.data_mut() {
        *v = data_rng.range_f64(-1.0, 1.0);
    }
    let forward_seed = crate::rng::subseed(seed, "gradcheck/forward");

    // Analytic pass: forward once, backprop the probe.
    net.zero_grads();
    {
        let mut rng = Rng::new(forward_seed);
        let y = net.forward_train(&x, &mut rng)?;
        if y.shape() != out_shape.as_slice() {
            return Err(NnError::Shape("probe shape mismatch".into()));
        }
    }
    net.backward(&probe)?;

    let analytic_params: Vec<Tensor<f64>> =
        net.trainable_params().iter().map(|p| p.grad.clone()).collect();

    // The input gradient requires caches in place; recompute the forward
    // (cheap at check sizes) and take backward's return value.
    let analytic_input = {
        net.zero_grads();
        let mut rng = Rng::new(forward_seed);
        let _ = net.forward_train(&x, &mut rng)?;
        net.backward(&probe)?
    };

    let mut max_err = 0.0f64;
    let mut checked = 0usize;

    // d/d(input)
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + eps;
        let lp = probe_loss(&mut net, &x, &probe, forward_seed)?;
        x.data_mut()[i] = orig - eps;
        let lm = probe_loss(&mut net, &x, &probe, forward_seed)?;
        x.data_mut()[i] = orig;
        let numeric = (lp - lm) / (2.0 * eps);
        max_err = max_err.max(rel_err(analytic_input.data()[i], numeric));
        checked += 1;
    }

    // d/d(parameters)
    let param_sizes: Vec<usize> = net.trainable_params().iter().map(|p| p.value.len()).collect();
    for (pi, &size) in param_sizes.iter().enumerate() {
        for i in 0..size {
            nudge(&mut net, pi, i, eps);
            let lp = probe_loss(&mut net, &x, &probe, forward_seed)?;
            nudge(&mut net, pi, i, -2.0 * eps);
            let lm = probe_loss(&mut net, &x, &probe, forward_seed)?;
            nudge(&mut net, pi, i, eps);
            let numeric = (lp - lm) / (2.0 * eps);
            max_err = max_err.max(rel_err(analytic_params[pi].data()[i], numeric));
            checked += 1;
        }
    }

    Ok(GradCheckReport { max_rel_err: max_err, elements_checked: checked })
}

fn nudge(net: &mut Network<f64>, param: usize, elem: usize, delta: f64) {
    let mut params = net.trainable_params();
    let v = &mut params[param].value.data_mut()[elem];
    *v += delta;
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dense_stack_gradients_match() {
        let specs = vec![
            LayerSpec::Dense { units: 5 },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 2 },
            LayerSpec::Sigmoid,
        ];
        let report = check_specs(&specs, &[4], 3, 11, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-3, "max err {}", report.max_rel_err);
    }
}
