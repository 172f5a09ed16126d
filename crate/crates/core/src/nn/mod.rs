//! Layers, losses and the optimizer used to train BT-equipped networks.
//!
//! Every layer exposes a forward pass and a hand-derived backward pass; a
//! network drives them in sequence. There is no autodiff tape.

mod activation;
mod batchnorm;
mod dense;
mod loss;
mod lstm;
mod model;
mod optim;

pub use activation::Activation;
pub use batchnorm::{BatchNorm, BnCache, BnMode};
pub use dense::{DenseGradients, DenseLayer};
pub use loss::softmax_cross_entropy;
pub use lstm::{BtLstm, LstmGradients, LstmState, LstmStepCache, SequenceOutput, GATE_ORDER};
pub use model::{Architecture, BtMlp, CopyNet, Network, TrainState};
pub use optim::{sgd_momentum_step, MOMENTUM};

use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Ordered access to the learnable tensors of a layer or network.
///
/// The order returned by `tensors`, `tensors_mut` and `tensor_names` is the
/// same, and gradients are always produced in this order.
pub trait Parameters<T: Scalar> {
    fn tensors(&self) -> Vec<&DenseTensor<T>>;
    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>>;
    fn tensor_names(&self) -> Vec<String>;

    fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl<T: Scalar> Parameters<T> for crate::bt::BtLayer<T> {
    fn tensors(&self) -> Vec<&DenseTensor<T>> {
        self.params().tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut DenseTensor<T>> {
        self.params_mut().tensors_mut()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.params().tensor_names()
    }
}

pub(crate) fn prefixed(prefix: &str, names: Vec<String>) -> Vec<String> {
    names.into_iter().map(|n| format!("{prefix}.{n}")).collect()
}
