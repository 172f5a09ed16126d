//! Randomized comparison of the factored forward pass against an explicit
//! dense matvec with the reconstructed weight matrix.

use rand::Rng;

use crate::bt::{BtConfig, BtLayer};
use crate::error::Result;
use crate::rng::{stream, uniform_tensor, Pcg32};
use crate::scalar::{Precision, Scalar};
use crate::tensor::{contract, DenseTensor};

/// Bounds for randomly drawn layer shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigLimits {
    pub max_order: usize,
    pub max_mode: usize,
    pub max_cp_rank: usize,
    pub max_tucker_rank: usize,
    pub max_batch: usize,
}

impl Default for ConfigLimits {
    fn default() -> Self {
        Self {
            max_order: 4,
            max_mode: 6,
            max_cp_rank: 4,
            max_tucker_rank: 3,
            max_batch: 3,
        }
    }
}

/// Draws a valid configuration within `limits`. The Tucker rank respects the
/// smallest non-trivial mode.
pub fn random_config(rng: &mut Pcg32, limits: &ConfigLimits) -> Result<BtConfig> {
    let d = rng.random_range(1..=limits.max_order);
    let mut modes = |_| rng.random_range(1..=limits.max_mode);
    let in_modes: Vec<usize> = (0..d).map(&mut modes).collect();
    let out_modes: Vec<usize> = (0..d).map(&mut modes).collect();
    let bound = in_modes
        .iter()
        .chain(&out_modes)
        .copied()
        .filter(|&m| m > 1)
        .min()
        .unwrap_or(1);
    let r = rng.random_range(1..=limits.max_tucker_rank.min(bound));
    let n = rng.random_range(1..=limits.max_cp_rank);
    let bias = rng.random_bool(0.5);
    BtConfig::new(in_modes, out_modes, n, r, bias)
}

/// `max |y_bt - y_dense| / max |y_dense|`, or the absolute gap when the
/// reference output is identically zero.
pub fn relative_gap<T: Scalar>(got: &DenseTensor<T>, want: &DenseTensor<T>) -> f64 {
    let scale = want.max_abs().to_f64();
    let gap = got
        .data()
        .iter()
        .zip(want.data())
        .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        gap
    } else {
        gap / scale
    }
}

/// `x W^T + b` with the dense reconstruction.
pub fn dense_reference<T: Scalar>(layer: &BtLayer<T>, x: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let w = layer.reconstruct()?;
    let mut y = contract(x, &w, &[1], &[1])?;
    if let Some(b) = &layer.params().bias {
        crate::bt::add_row_bias(&mut y, b);
    }
    Ok(y)
}

/// One trial: random parameters with nonzero bias, random `(B, I)` input.
pub fn oracle_trial<T: Scalar>(cfg: &BtConfig, rng: &mut Pcg32, batch: usize, zero_input: bool) -> Result<f64> {
    let mut layer = BtLayer::<T>::init(cfg.clone(), rng)?;
    if let Some(b) = layer.params_mut().bias.as_mut() {
        *b = uniform_tensor(rng, &[cfg.out_size()], 0.5)?;
    }
    let x = if zero_input {
        DenseTensor::zeros(vec![batch, cfg.in_size()])?
    } else {
        uniform_tensor(rng, &[batch, cfg.in_size()], 1.0)?
    };
    Ok(relative_gap(&layer.forward(&x)?, &dense_reference(&layer, &x)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub precision: Precision,
    pub trials: usize,
    pub max_rel_err: f64,
    pub worst_config: Option<BtConfig>,
}

impl OracleSummary {
    /// Acceptance threshold for the factored-vs-dense gap at this precision.
    pub fn threshold(precision: Precision) -> f64 {
        match precision {
            Precision::F64 => 1e-12,
            Precision::F32 => 1e-5,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err <= Self::threshold(self.precision)
    }
}

/// `trials` random configurations; trial `t` draws from stream `(seed, t)`.
pub fn oracle_sweep<T: Scalar>(seed: u64, trials: usize, limits: &ConfigLimits) -> Result<OracleSummary> {
    let mut summary = OracleSummary {
        precision: T::PRECISION,
        trials,
        max_rel_err: 0.0,
        worst_config: None,
    };
    for t in 0..trials {
        let mut rng = stream(seed, t as u64);
        let cfg = random_config(&mut rng, limits)?;
        let batch = rng.random_range(1..=limits.max_batch);
        let err = oracle_trial::<T>(&cfg, &mut rng, batch, false)?;
        if err > summary.max_rel_err || summary.worst_config.is_none() {
            summary.max_rel_err = summary.max_rel_err.max(err);
            summary.worst_config = Some(cfg);
        }
    }
    Ok(summary)
}
