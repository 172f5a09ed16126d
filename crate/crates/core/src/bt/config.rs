use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{checked_product, Shape};

/// Hyper-parameters of a block-term layer.
///
/// The dense-equivalent map is `J x I` with `I = prod(in_modes)` and
/// `J = prod(out_modes)`. Every block has one core of shape `(R, .., R)`
/// (`d` modes) and `d` factors of shape `(I_k, J_k, R)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct BtConfig {
    in_modes: Shape,
    out_modes: Shape,
    cp_rank: usize,
    tucker_rank: usize,
    use_bias: bool,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    in_modes: Vec<usize>,
    out_modes: Vec<usize>,
    cp_rank: usize,
    tucker_rank: usize,
    use_bias: bool,
}

impl TryFrom<RawConfig> for BtConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        BtConfig::new(raw.in_modes, raw.out_modes, raw.cp_rank, raw.tucker_rank, raw.use_bias)
    }
}

impl From<BtConfig> for RawConfig {
    fn from(c: BtConfig) -> Self {
        RawConfig {
            in_modes: c.in_modes.dims().to_vec(),
            out_modes: c.out_modes.dims().to_vec(),
            cp_rank: c.cp_rank,
            tucker_rank: c.tucker_rank,
            use_bias: c.use_bias,
        }
    }
}

impl BtConfig {
    pub fn new(
        in_modes: impl Into<Vec<usize>>,
        out_modes: impl Into<Vec<usize>>,
        cp_rank: usize,
        tucker_rank: usize,
        use_bias: bool,
    ) -> Result<Self> {
        let in_modes = Shape::new(in_modes)?;
        let out_modes = Shape::new(out_modes)?;
        if in_modes.order() != out_modes.order() {
            return Err(Error::arg(format!(
                "input modes {in_modes} and output modes {out_modes} must have the same order"
            )));
        }
        if cp_rank == 0 || tucker_rank == 0 {
            return Err(Error::arg("CP-rank and Tucker-rank must be positive"));
        }
        // Unit modes (the padded spatial output of a conv mapping) carry no
        // rank constraint; every other mode bounds the Tucker-rank.
        let bound = in_modes
            .dims()
            .iter()
            .chain(out_modes.dims())
            .copied()
            .filter(|&m| m > 1)
            .min()
            .unwrap_or(1);
        if tucker_rank > bound {
            return Err(Error::arg(format!(
                "Tucker-rank {tucker_rank} exceeds the smallest mode length {bound} of {in_modes} -> {out_modes}"
            )));
        }
        let d = in_modes.order() as u32;
        let entries = checked_product(&[in_modes.numel(), out_modes.numel()])
            .and_then(|_| tucker_rank.checked_pow(d));
        if entries.is_none() {
            return Err(Error::Overflow(format!("sizes of {in_modes} -> {out_modes}, R={tucker_rank}")));
        }
        Ok(BtConfig {
            in_modes,
            out_modes,
            cp_rank,
            tucker_rank,
            use_bias,
        })
    }

    pub fn in_modes(&self) -> &Shape {
        &self.in_modes
    }

    pub fn out_modes(&self) -> &Shape {
        &self.out_modes
    }

    /// Core-order `d`.
    pub fn order(&self) -> usize {
        self.in_modes.order()
    }

    pub fn cp_rank(&self) -> usize {
        self.cp_rank
    }

    pub fn tucker_rank(&self) -> usize {
        self.tucker_rank
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn with_bias(mut self, use_bias: bool) -> Self {
        self.use_bias = use_bias;
        self
    }

    /// Dense fan-in `I`.
    pub fn in_size(&self) -> usize {
        self.in_modes.numel()
    }

    /// Dense fan-out `J`.
    pub fn out_size(&self) -> usize {
        self.out_modes.numel()
    }

    pub fn core_dims(&self) -> Vec<usize> {
        vec![self.tucker_rank; self.order()]
    }

    pub fn factor_dims(&self, k: usize) -> [usize; 3] {
        [self.in_modes.dims()[k], self.out_modes.dims()[k], self.tucker_rank]
    }
}

impl fmt::Display for BtConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BT {} -> {} N={} R={}{}",
            self.in_modes,
            self.out_modes,
            self.cp_rank,
            self.tucker_rank,
            if self.use_bias { " +bias" } else { "" }
        )
    }
}

/// `N * (sum_k I_k J_k R + R^d)`, bias excluded.
pub fn bt_param_count(cfg: &BtConfig) -> Result<u64> {
    let overflow = || Error::Overflow(format!("parameter count of {cfg}"));
    let r = cfg.tucker_rank as u64;
    let mut factors: u64 = 0;
    for (&i, &j) in cfg.in_modes.dims().iter().zip(cfg.out_modes.dims()) {
        let term = (i as u64)
            .checked_mul(j as u64)
            .and_then(|v| v.checked_mul(r))
            .ok_or_else(overflow)?;
        factors = factors.checked_add(term).ok_or_else(overflow)?;
    }
    let core = r.checked_pow(cfg.order() as u32).ok_or_else(overflow)?;
    factors
        .checked_add(core)
        .and_then(|per_block| per_block.checked_mul(cfg.cp_rank as u64))
        .ok_or_else(overflow)
}
