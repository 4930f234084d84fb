//! LSTM over (batch, steps, features) with full backpropagation through
//! time. Gate order in the packed matrices is input, forget, candidate,
//! output; hidden and cell states start at zero.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use super::act::sigmoid;
use super::init::{init_tensor, Init};
use super::{shape_err, Layer, NnError, ParamGrad};
use crate::rng::Rng;
use crate::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Real, Tensor};

pub struct Lstm<T> {
    in_features: usize,
    units: usize,
    return_sequences: bool,
    w_input: Tensor<T>,     // (in_features, 4*units)
    w_recurrent: Tensor<T>, // (units, 4*units)
    bias: Tensor<T>,        // (4*units)
    wi_grad: Tensor<T>,
    wr_grad: Tensor<T>,
    b_grad: Tensor<T>,
    cache: Option<Cache<T>>,
}

struct Cache<T> {
    input: Tensor<T>,
    /// Post-activation gates per step: (batch, 4*units), order i|f|g|o.
    gates: Vec<Tensor<T>>,
    /// Hidden states h_0..h_T (h_0 = zeros).
    hidden: Vec<Tensor<T>>,
    /// Cell states c_0..c_T.
    cell: Vec<Tensor<T>>,
    /// tanh(c_t) per step, reused by the output-gate path.
    tanh_cell: Vec<Tensor<T>>,
}

impl<T: Real> Lstm<T> {
    pub fn new(
        in_features: usize,
        units: usize,
        return_sequences: bool,
        init: Init,
        rng: &mut Rng,
    ) -> Self {
        Lstm {
            in_features,
            units,
            return_sequences,
            w_input: init_tensor(&[in_features, 4 * units], in_features, 4 * units, init, rng),
            w_recurrent: init_tensor(&[units, 4 * units], units, 4 * units, init, rng),
            bias: Tensor::zeros(&[4 * units]),
            wi_grad: Tensor::zeros(&[in_features, 4 * units]),
            wr_grad: Tensor::zeros(&[units, 4 * units]),
            b_grad: Tensor::zeros(&[4 * units]),
            cache: None,
        }
    }

    /// Test hook: install explicit gate parameters.
    pub fn set_weights(&mut self, w_input: Tensor<T>, w_recurrent: Tensor<T>, bias: Tensor<T>) {
        assert_eq!(w_input.shape(), &[self.in_features, 4 * self.units]);
        assert_eq!(w_recurrent.shape(), &[self.units, 4 * self.units]);
        assert_eq!(bias.shape(), &[4 * self.units]);
        self.w_input = w_input;
        self.w_recurrent = w_recurrent;
        self.bias = bias;
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize), NnError> {
        match *x.shape() {
            [batch, steps, feats] if feats == self.in_features && steps >= 1 => Ok((batch, steps)),
            _ => shape_err(format!(
                "lstm expects (batch, steps>=1, {}), got {:?}",
                self.in_features,
                x.shape()
            )),
        }
    }

    /// Run the recurrence; optionally record per-step activations.
    fn run(&self, x: &Tensor<T>, batch: usize, steps: usize, record: bool) -> (Tensor<T>, Option<Cache<T>>) {
        let u = self.units;
        let four_u = 4 * u;
        let mut h = Tensor::zeros(&[batch, u]);
        let mut c = Tensor::zeros(&[batch, u]);
        let mut gates_log = Vec::new();
        let mut hidden_log = Vec::new();
        let mut cell_log = Vec::new();
        let mut tanh_log = Vec::new();
        if record {
            hidden_log.push(h.clone());
            cell_log.push(c.clone());
        }
        let mut seq_out = if self.return_sequences {
            Some(Tensor::zeros(&[batch, steps, u]))
        } else {
            None
        };
        for t in 0..steps {
            // z = x_t W + h_{t-1} U + b, then split into the four gates.
            let mut z = Tensor::zeros(&[batch, four_u]);
            for b in 0..batch {
                z.row_mut(b).copy_from_slice(self.bias.data());
            }
            let x_t = step_slice(x, t, batch, steps, self.in_features);
            matmul_acc(&x_t, self.w_input.data(), z.data_mut(), batch, self.in_features, four_u);
            matmul_acc(h.data(), self.w_recurrent.data(), z.data_mut(), batch, u, four_u);

            let mut tanh_c = Tensor::zeros(&[batch, u]);
            {
                let zd = z.data_mut();
                let cd = c.data_mut();
                let hd = h.data_mut();
                let td = tanh_c.data_mut();
                for b in 0..batch {
                    let zrow = &mut zd[b * four_u..(b + 1) * four_u];
                    for j in 0..u {
                        let i_g = sigmoid(zrow[j]);
                        let f_g = sigmoid(zrow[u + j]);
                        let g_g = zrow[2 * u + j].tanh();
                        let o_g = sigmoid(zrow[3 * u + j]);
                        zrow[j] = i_g;
                        zrow[u + j] = f_g;
                        zrow[2 * u + j] = g_g;
                        zrow[3 * u + j] = o_g;
                        let c_new = f_g * cd[b * u + j] + i_g * g_g;
                        let tc = c_new.tanh();
                        cd[b * u + j] = c_new;
                        td[b * u + j] = tc;
                        hd[b * u + j] = o_g * tc;
                    }
                }
            }
            if let Some(seq) = seq_out.as_mut() {
                let sd = seq.data_mut();
                for b in 0..batch {
                    sd[(b * steps + t) * u..(b * steps + t + 1) * u].copy_from_slice(&h.data()[b * u..(b + 1) * u]);
                }
            }
            if record {
                gates_log.push(z);
                hidden_log.push(h.clone());
                cell_log.push(c.clone());
                tanh_log.push(tanh_c);
            }
        }
        let out = match seq_out {
            Some(seq) => seq,
            None => h.clone(),
        };
        let cache = record.then(|| Cache {
            input: x.clone(),
            gates: gates_log,
            hidden: hidden_log,
            cell: cell_log,
            tanh_cell: tanh_log,
        });
        (out, cache)
    }
}

/// Copy step `t` of a (batch, steps, features) tensor into a (batch,
/// features) row-major buffer.
fn step_slice<T: Real>(x: &Tensor<T>, t: usize, batch: usize, steps: usize, feats: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * feats);
    let xd = x.data();
    for b in 0..batch {
        out.extend_from_slice(&xd[(b * steps + t) * feats..(b * steps + t + 1) * feats]);
    }
    out
}

impl<T: Real> Layer<T> for Lstm<T> {
    fn name(&self) -> &'static str {
        "lstm"
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        match *in_shape {
            [batch, steps, feats] if feats == self.in_features && steps >= 1 => {
                Ok(if self.return_sequences {
                    alloc::vec![batch, steps, self.units]
                } else {
                    alloc::vec![batch, self.units]
                })
            }
            _ => shape_err(format!(
                "lstm expects (batch, steps>=1, {}), got {:?}",
                self.in_features, in_shape
            )),
        }
    }

    fn forward_train(&mut self, x: &Tensor<T>, _rng: &mut Rng) -> Result<Tensor<T>, NnError> {
        let (batch, steps) = self.check(x)?;
        let (out, cache) = self.run(x, batch, steps, true);
        self.cache = cache;
        Ok(out)
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (batch, steps) = self.check(x)?;
        Ok(self.run(x, batch, steps, false).0)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self.cache.take().ok_or_else(|| {
            NnError::Config("lstm backward without forward".into())
        })?;
        let (batch, steps) = (cache.input.shape()[0], cache.input.shape()[1]);
        let u = self.units;
        let four_u = 4 * u;
        let expected: Vec<usize> = if self.return_sequences {
            alloc::vec![batch, steps, u]
        } else {
            alloc::vec![batch, u]
        };
        if grad_out.shape() != expected {
            return shape_err(format!(
                "lstm backward expects {expected:?}, got {:?}",
                grad_out.shape()
            ));
        }

        let mut dx: Tensor<T> = Tensor::zeros(&[batch, steps, self.in_features]);
        let mut dh: Tensor<T> = Tensor::zeros(&[batch, u]); // gradient flowing into h_t
        let mut dc: Tensor<T> = Tensor::zeros(&[batch, u]); // gradient flowing into c_t
        if !self.return_sequences {
            dh.data_mut().copy_from_slice(grad_out.data());
        }
        let one = T::one();
        for t in (0..steps).rev() {
            if self.return_sequences {
                let gd = grad_out.data();
                let dhd = dh.data_mut();
                for b in 0..batch {
                    for j in 0..u {
                        dhd[b * u + j] = dhd[b * u + j] + gd[(b * steps + t) * u + j];
                    }
                }
            }
            let gates = &cache.gates[t];
            let tanh_c = &cache.tanh_cell[t];
            let c_prev = &cache.cell[t];
            let h_prev = &cache.hidden[t];

            // Gate-level gradients, packed (batch, 4u) in i|f|g|o order.
            let mut dz = Tensor::zeros(&[batch, four_u]);
            {
                let dzd = dz.data_mut();
                let dhd = dh.data();
                let dcd = dc.data_mut();
                let gd = gates.data();
                let tcd = tanh_c.data();
                let cpd = c_prev.data();
                for b in 0..batch {
                    let grow = &gd[b * four_u..(b + 1) * four_u];
                    for j in 0..u {
                        let i_g = grow[j];
                        let f_g = grow[u + j];
                        let g_g = grow[2 * u + j];
                        let o_g = grow[3 * u + j];
                        let tc = tcd[b * u + j];
                        let dh_v = dhd[b * u + j];
                        // h = o * tanh(c)
                        let do_pre = dh_v * tc * o_g * (one - o_g);
                        let dc_v = dcd[b * u + j] + dh_v * o_g * (one - tc * tc);
                        // c = f * c_prev + i * g
                        let di_pre = dc_v * g_g * i_g * (one - i_g);
                        let df_pre = dc_v * cpd[b * u + j] * f_g * (one - f_g);
                        let dg_pre = dc_v * i_g * (one - g_g * g_g);
                        dzd[b * four_u + j] = di_pre;
                        dzd[b * four_u + u + j] = df_pre;
                        dzd[b * four_u + 2 * u + j] = dg_pre;
                        dzd[b * four_u + 3 * u + j] = do_pre;
                        // gradient into c_{t-1}
                        dcd[b * u + j] = dc_v * f_g;
                    }
                }
            }

            // Parameter gradients: dW += x_t^T dz ; dU += h_{t-1}^T dz ; db += col-sum dz.
            let x_t = step_slice(&cache.input, t, batch, steps, self.in_features);
            matmul_at_acc(&x_t, dz.data(), self.wi_grad.data_mut(), batch, self.in_features, four_u);
            matmul_at_acc(h_prev.data(), dz.data(), self.wr_grad.data_mut(), batch, u, four_u);
            for b in 0..batch {
                let dzrow = &dz.data()[b * four_u..(b + 1) * four_u];
                for (bg, &g) in self.b_grad.data_mut().iter_mut().zip(dzrow.iter()) {
                    *bg = *bg + g;
                }
            }

            // Input and recurrent gradients: dx_t = dz W^T ; dh_{t-1} = dz U^T.
            let mut dx_t = alloc::vec![T::zero(); batch * self.in_features];
            matmul_bt_acc(dz.data(), self.w_input.data(), &mut dx_t, batch, four_u, self.in_features);
            {
                let dxd = dx.data_mut();
                for b in 0..batch {
                    let dst = &mut dxd[(b * steps + t) * self.in_features..(b * steps + t + 1) * self.in_features];
                    let src = &dx_t[b * self.in_features..(b + 1) * self.in_features];
                    dst.copy_from_slice(src);
                }
            }
            let mut dh_prev = Tensor::zeros(&[batch, u]);
            matmul_bt_acc(dz.data(), self.w_recurrent.data(), dh_prev.data_mut(), batch, four_u, u);
            dh = dh_prev;
        }
        Ok(dx)
    }

    fn trainable(&mut self) -> Vec<ParamGrad<'_, T>> {
        alloc::vec![
            ParamGrad { value: &mut self.w_input, grad: &mut self.wi_grad },
            ParamGrad { value: &mut self.w_recurrent, grad: &mut self.wr_grad },
            ParamGrad { value: &mut self.bias, grad: &mut self.b_grad },
        ]
    }

    fn state(&self) -> Vec<&Tensor<T>> {
        alloc::vec![&self.w_input, &self.w_recurrent, &self.bias]
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        alloc::vec![&mut self.w_input, &mut self.w_recurrent, &mut self.bias]
    }

    fn param_count(&self) -> usize {
        self.w_input.len() + self.w_recurrent.len() + self.bias.len()
    }
}
