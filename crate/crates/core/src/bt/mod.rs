//! Block-term layers: a dense `J x I` map stored as a sum of `N` Tucker
//! blocks over tensorized input and output modes.

mod config;
mod conv;
mod layer;

pub use config::{bt_param_count, BtConfig};
pub use conv::conv_to_bt_modes;
pub use layer::{BtGradients, BtLayer, BtParams, RECONSTRUCT_CAP};
pub(crate) use layer::{add_row_bias, column_sums};
