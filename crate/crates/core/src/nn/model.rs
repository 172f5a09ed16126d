use serde::{Deserialize, Serialize};

use crate::bt::{BtConfig, BtLayer};
use crate::data::CopyBatch;
use crate::error::{Error, Result};
use crate::nn::{
    prefixed, sgd_momentum_step, softmax_cross_entropy, Activation, BatchNorm, BnCache, BnMode, BtLstm, DenseLayer,
    Parameters,
};
use crate::rng::{seeded, Pcg32};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Layer kinds and shapes of a network, enough to rebuild it from scratch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Architecture {
    /// `pad -> BT -> batch norm -> relu -> dense -> softmax`.
    BtMlp {
        input_width: usize,
        bt: BtConfig,
        classes: usize,
    },
    /// `BT-LSTM -> dense head per step`, scored on the delayed-copy task.
    BtLstmCopy {
        input_map: BtConfig,
        hidden: usize,
        lag: usize,
    },
}

/// BT layer classifier over flat inputs, zero-padded up to the BT fan-in.
#[derive(Debug, Clone, PartialEq)]
pub struct BtMlp<T> {
    input_width: usize,
    pub bt: BtLayer<T>,
    pub bn: BatchNorm<T>,
    pub head: DenseLayer<T>,
}

struct MlpCache<T> {
    padded: DenseTensor<T>,
    bn_cache: BnCache<T>,
    normed: DenseTensor<T>,
    hidden: DenseTensor<T>,
}

impl<T: Scalar> BtMlp<T> {
    pub fn init(input_width: usize, bt: BtConfig, classes: usize, rng: &mut Pcg32) -> Result<Self> {
        if input_width > bt.in_size() {
            return Err(Error::arg(format!(
                "input width {input_width} exceeds BT fan-in {}",
                bt.in_size()
            )));
        }
        let hidden = bt.out_size();
        let bt = BtLayer::init(bt, rng)?;
        let head = DenseLayer::init(hidden, classes, rng)?;
        Ok(BtMlp {
            input_width,
            bt,
            bn: BatchNorm::new(hidden)?,
            head,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    fn pad(&self, x: &DenseTensor<T>) -> Result<DenseTensor<T>> {
        let (b, w) = x.as_matrix_dims("classifier input")?;
        if w != self.input_width {
            return Err(Error::dim(format!("expected {} input features, got {w}", self.input_width)));
        }
        let full = self.bt.config().in_size();
        if full == w {
            return Ok(x.clone());
        }
        let mut data = vec![T::ZERO; b * full];
        for (dst, src) in data.chunks_mut(full).zip(x.data().chunks(w)) {
            dst[..w].copy_from_slice(src);
        }
        DenseTensor::from_vec(vec![b, full], data)
    }

    fn forward_cached(&self, x: &DenseTensor<T>, mode: BnMode) -> Result<(DenseTensor<T>, MlpCache<T>)> {
        let padded = self.pad(x)?;
        let pre = self.bt.forward(&padded)?;
        let (normed, bn_cache) = self.bn.forward(&pre, mode)?;
        let hidden = Activation::Relu.forward(&normed);
        let logits = self.head.forward(&hidden)?;
        Ok((
            logits,
            MlpCache {
                padded,
                bn_cache,
                normed,
                hidden,
            },
        ))
    }

    pub fn logits(&self, x: &DenseTensor<T>, mode: BnMode) -> Result<DenseTensor<T>> {
        Ok(self.forward_cached(x, mode)?.0)
    }

    pub fn loss(&self, x: &DenseTensor<T>, labels: &[usize], mode: BnMode) -> Result<T> {
        Ok(softmax_cross_entropy(&self.logits(x, mode)?, labels)?.0)
    }

    /// Train-mode loss and parameter gradients in [`Parameters`] order. The
    /// returned cache carries the batch statistics for the running estimates.
    pub fn loss_and_grads(&self, x: &DenseTensor<T>, labels: &[usize]) -> Result<(T, Vec<DenseTensor<T>>, BnCache<T>)> {
        let (logits, cache) = self.forward_cached(x, BnMode::Train)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, labels)?;
        let head = self.head.backward(&cache.hidden, &d_logits)?;
        let d_normed = Activation::Relu.backward(&cache.normed, &head.d_input)?;
        let (d_pre, d_gamma, d_beta) = self.bn.backward(&cache.bn_cache, &d_normed)?;
        let bt = self.bt.backward(&cache.padded, &d_pre)?;
        let mut grads = bt.into_param_grads();
        grads.extend([d_gamma, d_beta, head.d_weight, head.d_bias]);
        Ok((loss, grads, cache.bn_cache))
    }

    pub fn predict(&self, x: &DenseTensor<T>) -> Result<Vec<usize>> {
        let logits = self.logits(x, BnMode::Eval)?;
        Ok(argmax_rows(&logits))
    }
}

pub(crate) fn argmax_rows<T: Scalar>(m: &DenseTensor<T>) -> Vec<usize> {
    let c = m.dims()[m.order() - 1];
    m.data()
        .chunks(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, row[0]), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

impl<T: Scalar> Parameters<T> for BtMlp<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        let mut out = self.bt.tensors();
        out.extend(self.bn.tensors());
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        let mut out = self.bt.tensors_mut();
        out.extend(self.bn.tensors_mut());
        out.extend(self.head.tensors_mut());
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = prefixed("bt", self.bt.tensor_names());
        out.extend(prefixed("bn", self.bn.tensor_names()));
        out.extend(prefixed("head", self.head.tensor_names()));
        out
    }
}

/// BT-LSTM with a per-step dense readout over the input alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyNet<T> {
    pub lstm: BtLstm<T>,
    pub head: DenseLayer<T>,
    pub lag: usize,
}

impl<T: Scalar> CopyNet<T> {
    pub fn init(input_map: BtConfig, hidden: usize, lag: usize, rng: &mut Pcg32) -> Result<Self> {
        let symbols = input_map.in_size();
        let lstm = BtLstm::init(input_map, hidden, rng)?;
        let head = DenseLayer::init(hidden, symbols, rng)?;
        Ok(CopyNet { lstm, head, lag })
    }

    pub fn alphabet(&self) -> usize {
        self.lstm.input_size()
    }

    fn check_batch(&self, batch: &CopyBatch<T>) -> Result<()> {
        if batch.lag != self.lag || batch.alphabet != self.alphabet() {
            return Err(Error::arg(format!(
                "batch (alphabet {}, lag {}) does not match network (alphabet {}, lag {})",
                batch.alphabet,
                batch.lag,
                self.alphabet(),
                self.lag
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy over all scored steps.
    pub fn loss(&self, batch: &CopyBatch<T>) -> Result<T> {
        self.check_batch(batch)?;
        let (states, _) = self.lstm.forward_sequence(&batch.inputs, &self.lstm.zero_state(batch.batch)?)?;
        let mut total = T::ZERO;
        for (t, state) in states.iter().enumerate() {
            if let Some(targets) = batch.targets(t) {
                total += softmax_cross_entropy(&self.head.forward(&state.h)?, targets)?.0;
            }
        }
        Ok(total / T::from_f64(batch.scored_steps() as f64))
    }

    /// Returns `(loss, gradients, accuracy over scored steps)`.
    pub fn loss_and_grads(&self, batch: &CopyBatch<T>) -> Result<(T, Vec<DenseTensor<T>>, f64)> {
        self.check_batch(batch)?;
        let (states, caches) = self.lstm.forward_sequence(&batch.inputs, &self.lstm.zero_state(batch.batch)?)?;
        let weight = T::ONE / T::from_f64(batch.scored_steps() as f64);
        let mut total = T::ZERO;
        let mut correct = 0usize;
        let mut head_grads: Option<Vec<DenseTensor<T>>> = None;
        let mut d_h = Vec::with_capacity(states.len());
        for (t, state) in states.iter().enumerate() {
            let Some(targets) = batch.targets(t) else {
                d_h.push(DenseTensor::zeros(state.h.dims().to_vec())?);
                continue;
            };
            let logits = self.head.forward(&state.h)?;
            correct += argmax_rows(&logits).iter().zip(targets).filter(|(p, t)| p == t).count();
            let (loss, d_logits) = softmax_cross_entropy(&logits, targets)?;
            total += loss * weight;
            let g = self.head.backward(&state.h, &d_logits.scale(weight))?;
            d_h.push(g.d_input);
            match head_grads.as_mut() {
                Some(acc) => {
                    acc[0].add_assign(&g.d_weight)?;
                    acc[1].add_assign(&g.d_bias)?;
                }
                None => head_grads = Some(vec![g.d_weight, g.d_bias]),
            }
        }
        let lstm = self.lstm.bptt(&caches, &d_h)?;
        let mut grads = lstm.params;
        grads.extend(head_grads.expect("T > lag"));
        let accuracy = correct as f64 / (batch.scored_steps() * batch.batch) as f64;
        Ok((total, grads, accuracy))
    }
}

impl<T: Scalar> Parameters<T> for CopyNet<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        let mut out = self.lstm.tensors();
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        let mut out = self.lstm.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = prefixed("lstm", self.lstm.tensor_names());
        out.extend(prefixed("head", self.head.tensor_names()));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network<T> {
    Mlp(BtMlp<T>),
    Copy(CopyNet<T>),
}

impl<T: Scalar> Network<T> {
    pub fn init(arch: &Architecture, rng: &mut Pcg32) -> Result<Self> {
        Ok(match arch {
            Architecture::BtMlp {
                input_width,
                bt,
                classes,
            } => Network::Mlp(BtMlp::init(*input_width, bt.clone(), *classes, rng)?),
            Architecture::BtLstmCopy { input_map, hidden, lag } => {
                Network::Copy(CopyNet::init(input_map.clone(), *hidden, *lag, rng)?)
            }
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Mlp(m) => Architecture::BtMlp {
                input_width: m.input_width,
                bt: m.bt.config().clone(),
                classes: m.head.out_features(),
            },
            Network::Copy(c) => Architecture::BtLstmCopy {
                input_map: c.lstm.input_map.config().clone(),
                hidden: c.lstm.hidden(),
                lag: c.lag,
            },
        }
    }

    /// Non-learned state (batch-norm running statistics).
    pub fn buffers(&self) -> Vec<(String, &DenseTensor<T>)> {
        match self {
            Network::Mlp(m) => vec![
                ("bn.running_mean".into(), &m.bn.running_mean),
                ("bn.running_var".into(), &m.bn.running_var),
            ],
            Network::Copy(_) => Vec::new(),
        }
    }

    /// Parameters (in [`Parameters`] order) followed by buffers.
    pub fn tensors_and_buffers_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        match self {
            Network::Mlp(m) => {
                let mut out = m.bt.tensors_mut();
                out.extend([&mut m.bn.gamma, &mut m.bn.beta]);
                out.extend(m.head.tensors_mut());
                out.extend([&mut m.bn.running_mean, &mut m.bn.running_var]);
                out
            }
            Network::Copy(c) => c.tensors_mut(),
        }
    }
}

impl<T: Scalar> Parameters<T> for Network<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        match self {
            Network::Mlp(m) => m.tensors(),
            Network::Copy(c) => c.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        match self {
            Network::Mlp(m) => m.tensors_mut(),
            Network::Copy(c) => c.tensors_mut(),
        }
    }

    fn tensor_names(&self) -> Vec<String> {
        match self {
            Network::Mlp(m) => m.tensor_names(),
            Network::Copy(c) => c.tensor_names(),
        }
    }
}

/// Everything needed to continue training bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T> {
    pub network: Network<T>,
    /// Momentum buffers, one per parameter tensor.
    pub velocity: Vec<DenseTensor<T>>,
    pub rng: Pcg32,
    /// Seed the run started from; per-epoch shuffles derive from it.
    pub seed: u64,
    pub step: u64,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let network = Network::init(arch, &mut rng)?;
        let velocity = network
            .tensors()
            .iter()
            .map(|t| DenseTensor::zeros(t.dims().to_vec()))
            .collect::<Result<_>>()?;
        Ok(TrainState {
            network,
            velocity,
            rng,
            seed,
            step: 0,
        })
    }

    /// One SGD-with-momentum update; increments `step`.
    pub fn apply_gradients(&mut self, grads: &[DenseTensor<T>], lr: f64) -> Result<()> {
        sgd_momentum_step(self.network.tensors_mut(), &mut self.velocity, grads, lr)?;
        self.step += 1;
        Ok(())
    }
}
