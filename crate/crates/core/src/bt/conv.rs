use crate::bt::config::BtConfig;
use crate::error::{Error, Result};

/// Maps an `h x w x c_in x c_out` convolution kernel onto block-term modes.
///
/// The kernel is viewed as a `(h w c_in) x c_out` matrix; the input side
/// becomes `(h, w, split_in..)` and the output side `(1, 1, split_out..)`
/// so both sides have the same order.
#[allow(clippy::too_many_arguments)]
pub fn conv_to_bt_modes(
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    split_in: &[usize],
    split_out: &[usize],
    cp_rank: usize,
    tucker_rank: usize,
) -> Result<BtConfig> {
    let pi: usize = split_in.iter().product();
    let po: usize = split_out.iter().product();
    if split_in.is_empty() || pi != c_in {
        return Err(Error::arg(format!(
            "input split {split_in:?} does not factor C_in = {c_in}"
        )));
    }
    if split_out.is_empty() || po != c_out {
        return Err(Error::arg(format!(
            "output split {split_out:?} does not factor C_out = {c_out}"
        )));
    }
    if split_in.len() != split_out.len() {
        return Err(Error::arg(format!(
            "splits {split_in:?} and {split_out:?} must have equal length"
        )));
    }
    let in_modes: Vec<usize> = [h, w].into_iter().chain(split_in.iter().copied()).collect();
    let out_modes: Vec<usize> = [1, 1].into_iter().chain(split_out.iter().copied()).collect();
    BtConfig::new(in_modes, out_modes, cp_rank, tucker_rank, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::config::bt_param_count;

    #[test]
    fn lenet_style_kernel() {
        let cfg = conv_to_bt_modes(5, 5, 64, 64, &[64], &[64], 1, 2).unwrap();
        assert_eq!(cfg.in_modes().dims(), &[5, 5, 64]);
        assert_eq!(cfg.out_modes().dims(), &[1, 1, 64]);
    }

    #[test]
    fn unet_last_layer() {
        let cfg = conv_to_bt_modes(3, 3, 256, 256, &[16, 16], &[16, 16], 1, 2).unwrap();
        assert_eq!(cfg.in_modes().dims(), &[3, 3, 16, 16]);
        assert_eq!(cfg.out_modes().dims(), &[1, 1, 16, 16]);
        // 3*1*2 + 3*1*2 + 256*2 + 256*2 + 2^4
        assert_eq!(bt_param_count(&cfg).unwrap(), 1052);
    }

    #[test]
    fn unit_spatial_extent() {
        let cfg = conv_to_bt_modes(1, 1, 4, 4, &[4], &[4], 1, 1).unwrap();
        assert_eq!(cfg.in_modes().dims(), &[1, 1, 4]);
        assert_eq!(cfg.out_modes().dims(), &[1, 1, 4]);
    }

    #[test]
    fn bad_split() {
        assert!(matches!(
            conv_to_bt_modes(3, 3, 256, 256, &[16, 15], &[16, 16], 1, 1),
            Err(Error::Argument(_))
        ));
    }
}
