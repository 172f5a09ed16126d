pub mod bench;
pub mod check;
pub mod params;
pub mod train;

use anyhow::Result;
use btnn::BtConfig;

use crate::LayerArgs;

pub fn bt_config(layer: &LayerArgs, bias: bool) -> Result<BtConfig> {
    Ok(BtConfig::new(
        layer.in_modes.clone(),
        layer.out_modes.clone(),
        layer.cp_rank,
        layer.tucker_rank,
        bias,
    )?)
}
