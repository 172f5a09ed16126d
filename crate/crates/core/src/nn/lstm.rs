use crate::bt::{BtConfig, BtLayer};
use crate::error::{Error, Result};
use crate::nn::activation::sigmoid;
use crate::nn::{prefixed, DenseLayer, Parameters};
use crate::rng::Pcg32;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// LSTM whose input-to-hidden map is a BT layer producing the four gate
/// pre-activations, concatenated in the order `f, i, c~, o`.
///
/// The recurrent map `U` stays dense; its bias is the gate bias `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BtLstm<T> {
    pub input_map: BtLayer<T>,
    pub recurrent: DenseLayer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: DenseTensor<T>,
    pub c: DenseTensor<T>,
}

/// Intermediates kept by [`BtLstm::step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache<T> {
    x: DenseTensor<T>,
    h_prev: DenseTensor<T>,
    c_prev: DenseTensor<T>,
    /// Post-activation gates `(B, 4H)`.
    gates: DenseTensor<T>,
    tanh_c: DenseTensor<T>,
}

#[derive(Debug, Clone)]
pub struct LstmGradients<T> {
    /// In [`Parameters::tensors`] order.
    pub params: Vec<DenseTensor<T>>,
    /// `(T, B, I)`.
    pub d_inputs: DenseTensor<T>,
    pub d_h0: DenseTensor<T>,
    pub d_c0: DenseTensor<T>,
}

/// States after each step and the caches for [`BtLstm::bptt`].
pub type SequenceOutput<T> = (Vec<LstmState<T>>, Vec<LstmStepCache<T>>);

/// Gate layout of the concatenated pre-activations.
pub const GATE_ORDER: &str = "f,i,c,o";

impl<T: Scalar> BtLstm<T> {
    pub fn new(input_map: BtLayer<T>, recurrent: DenseLayer<T>) -> Result<Self> {
        let h = recurrent.in_features();
        if input_map.config().use_bias() {
            return Err(Error::arg("BT-LSTM input map must not carry its own bias"));
        }
        if input_map.config().out_size() != 4 * h || recurrent.out_features() != 4 * h {
            return Err(Error::dim(format!(
                "hidden size {h} needs 4H = {} gate outputs, input map gives {} and recurrent map {}",
                4 * h,
                input_map.config().out_size(),
                recurrent.out_features()
            )));
        }
        Ok(BtLstm { input_map, recurrent })
    }

    /// `input_map` must produce `4 * hidden` outputs.
    pub fn init(input_map: BtConfig, hidden: usize, rng: &mut Pcg32) -> Result<Self> {
        let input_map = BtLayer::init(input_map.with_bias(false), rng)?;
        let mut recurrent = DenseLayer::init(hidden, 4 * hidden, rng)?;
        // forget-gate bias of 1 keeps early gradients flowing through the cell
        for v in &mut recurrent.bias.data_mut()[..hidden] {
            *v = T::ONE;
        }
        BtLstm::new(input_map, recurrent)
    }

    pub fn hidden(&self) -> usize {
        self.recurrent.in_features()
    }

    pub fn input_size(&self) -> usize {
        self.input_map.config().in_size()
    }

    pub fn zero_state(&self, batch: usize) -> Result<LstmState<T>> {
        Ok(LstmState {
            h: DenseTensor::zeros(vec![batch, self.hidden()])?,
            c: DenseTensor::zeros(vec![batch, self.hidden()])?,
        })
    }

    pub fn step(&self, x: &DenseTensor<T>, state: &LstmState<T>) -> Result<(LstmState<T>, LstmStepCache<T>)> {
        let hsz = self.hidden();
        state.h.expect_same_shape(&state.c, "LSTM state")?;
        let (b, _) = x.as_matrix_dims("LSTM input")?;
        if state.h.dims() != [b, hsz] {
            return Err(Error::dim(format!("LSTM state must be ({b}, {hsz}), got {}", state.h.shape())));
        }
        let mut gates = self.input_map.forward(x)?;
        gates.add_assign(&self.recurrent.forward(&state.h)?)?;
        for row in gates.data_mut().chunks_mut(4 * hsz) {
            let (sig_a, rest) = row.split_at_mut(2 * hsz);
            let (cand, out) = rest.split_at_mut(hsz);
            sig_a.iter_mut().chain(out.iter_mut()).for_each(|v| *v = sigmoid(*v));
            cand.iter_mut().for_each(|v| *v = v.tanh());
        }
        let mut c = state.c.clone();
        let mut h = state.h.clone();
        let mut tanh_c = state.c.clone();
        for (bi, g) in gates.data().chunks(4 * hsz).enumerate() {
            let row = bi * hsz..(bi + 1) * hsz;
            let (cr, hr, tr) = (
                &mut c.data_mut()[row.clone()],
                &mut h.data_mut()[row.clone()],
                &mut tanh_c.data_mut()[row.clone()],
            );
            let c_prev = &state.c.data()[row];
            for k in 0..hsz {
                let (f, i, cand, o) = (g[k], g[hsz + k], g[2 * hsz + k], g[3 * hsz + k]);
                cr[k] = f * c_prev[k] + i * cand;
                tr[k] = cr[k].tanh();
                hr[k] = o * tr[k];
            }
        }
        h.ensure_finite("LSTM step")?;
        let cache = LstmStepCache {
            x: x.clone(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates,
            tanh_c,
        };
        Ok((LstmState { h, c }, cache))
    }

    /// Runs `x_seq` of shape `(T, B, I)`; returns the states after each step.
    pub fn forward_sequence(
        &self,
        x_seq: &DenseTensor<T>,
        init: &LstmState<T>,
    ) -> Result<SequenceOutput<T>> {
        let (steps, batch, width) = seq_dims(x_seq)?;
        let mut states = Vec::with_capacity(steps);
        let mut caches = Vec::with_capacity(steps);
        let mut state = init.clone();
        for x in x_seq.data().chunks(batch * width) {
            let xt = DenseTensor::from_vec(vec![batch, width], x.to_vec())?;
            let (next, cache) = self.step(&xt, &state)?;
            states.push(next.clone());
            caches.push(cache);
            state = next;
        }
        Ok((states, caches))
    }

    /// One step of the reverse pass. `d_h`/`d_c` are the total gradients
    /// arriving at this step's outputs. Returns `(d_x, d_h_prev, d_c_prev,
    /// parameter gradients)`.
    #[allow(clippy::type_complexity)]
    pub fn step_backward(
        &self,
        cache: &LstmStepCache<T>,
        d_h: &DenseTensor<T>,
        d_c: &DenseTensor<T>,
    ) -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>, Vec<DenseTensor<T>>)> {
        let hsz = self.hidden();
        d_h.expect_same_shape(&cache.h_prev, "LSTM d_h")?;
        d_c.expect_same_shape(&cache.c_prev, "LSTM d_c")?;
        let mut d_pre = cache.gates.clone();
        let mut d_c_prev = cache.c_prev.clone();
        for (bi, (g, dp)) in cache
            .gates
            .data()
            .chunks(4 * hsz)
            .zip(d_pre.data_mut().chunks_mut(4 * hsz))
            .enumerate()
        {
            let row = bi * hsz..(bi + 1) * hsz;
            let (dh, dc, cp, tc) = (
                &d_h.data()[row.clone()],
                &d_c.data()[row.clone()],
                &cache.c_prev.data()[row.clone()],
                &cache.tanh_c.data()[row.clone()],
            );
            let dcp = &mut d_c_prev.data_mut()[row];
            for k in 0..hsz {
                let (f, i, cand, o) = (g[k], g[hsz + k], g[2 * hsz + k], g[3 * hsz + k]);
                let dct = dc[k] + dh[k] * o * (T::ONE - tc[k] * tc[k]);
                dp[k] = dct * cp[k] * f * (T::ONE - f);
                dp[hsz + k] = dct * cand * i * (T::ONE - i);
                dp[2 * hsz + k] = dct * i * (T::ONE - cand * cand);
                dp[3 * hsz + k] = dh[k] * tc[k] * o * (T::ONE - o);
                dcp[k] = dct * f;
            }
        }
        let bt = self.input_map.backward(&cache.x, &d_pre)?;
        let rec = self.recurrent.backward(&cache.h_prev, &d_pre)?;
        let d_x = bt.d_input.clone();
        let mut grads = bt.into_param_grads();
        grads.push(rec.d_weight);
        grads.push(rec.d_bias);
        Ok((d_x, rec.d_input, d_c_prev, grads))
    }

    /// Backpropagation through time over cached steps.
    ///
    /// `d_h[t]` is the loss gradient with respect to the hidden output of step
    /// `t` (excluding what flows back from step `t + 1`).
    pub fn bptt(&self, caches: &[LstmStepCache<T>], d_h: &[DenseTensor<T>]) -> Result<LstmGradients<T>> {
        if caches.is_empty() {
            return Err(Error::State("BPTT called without forward caches".into()));
        }
        if caches.len() != d_h.len() {
            return Err(Error::State(format!(
                "{} cached steps but {} hidden-state gradients",
                caches.len(),
                d_h.len()
            )));
        }
        let mut carry_h = DenseTensor::zeros(caches[0].h_prev.dims().to_vec())?;
        let mut carry_c = carry_h.clone();
        let mut params: Option<Vec<DenseTensor<T>>> = None;
        let mut d_inputs: Vec<DenseTensor<T>> = Vec::with_capacity(caches.len());
        for (cache, dh) in caches.iter().zip(d_h).rev() {
            let mut total = dh.clone();
            total.add_assign(&carry_h)?;
            let (dx, dhp, dcp, grads) = self.step_backward(cache, &total, &carry_c)?;
            match params.as_mut() {
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_assign(g)?;
                    }
                }
                None => params = Some(grads),
            }
            d_inputs.push(dx);
            carry_h = dhp;
            carry_c = dcp;
        }
        d_inputs.reverse();
        let (batch, width) = d_inputs[0].as_matrix_dims("LSTM d_x")?;
        let flat: Vec<T> = d_inputs.into_iter().flat_map(|t| t.into_data()).collect();
        Ok(LstmGradients {
            params: params.expect("non-empty sequence"),
            d_inputs: DenseTensor::from_vec(vec![caches.len(), batch, width], flat)?,
            d_h0: carry_h,
            d_c0: carry_c,
        })
    }

    /// BPTT when only the final hidden state receives a gradient.
    pub fn bptt_final(&self, caches: &[LstmStepCache<T>], d_h_last: &DenseTensor<T>) -> Result<LstmGradients<T>> {
        if caches.is_empty() {
            return Err(Error::State("BPTT called without forward caches".into()));
        }
        let zero = DenseTensor::zeros(d_h_last.dims().to_vec())?;
        let mut d_h = vec![zero; caches.len()];
        *d_h.last_mut().expect("non-empty") = d_h_last.clone();
        self.bptt(caches, &d_h)
    }
}

pub(crate) fn seq_dims<T: Scalar>(x_seq: &DenseTensor<T>) -> Result<(usize, usize, usize)> {
    match x_seq.dims() {
        &[t, b, i] => Ok((t, b, i)),
        _ => Err(Error::dim(format!("sequence input must be (T, B, I), got {}", x_seq.shape()))),
    }
}

impl<T: Scalar> Parameters<T> for BtLstm<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        let mut out = self.input_map.tensors();
        out.extend(self.recurrent.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        let mut out = self.input_map.tensors_mut();
        out.extend(self.recurrent.tensors_mut());
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = prefixed("input_map", self.input_map.tensor_names());
        out.extend(prefixed("recurrent", self.recurrent.tensor_names()));
        out
    }
}
