//! Block-term (BT) tensor layers.
//!
//! A BT layer replaces the weight matrix of a fully-connected layer by a
//! block-term decomposition over tensorized input and output modes. This crate
//! provides the dense tensor substrate, the layer itself with hand-derived
//! gradients, a closed-form parameter/FLOP cost model, a small set of network
//! layers (including a BT-LSTM cell) with an SGD trainer, and the data and
//! checkpoint formats around them.

pub mod bt;
pub mod cost;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use bt::{bt_param_count, conv_to_bt_modes, BtConfig, BtGradients, BtLayer, BtParams};
pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};
pub use tensor::{contract, DenseTensor, Shape};
