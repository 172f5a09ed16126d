//! Closed-form parameter, compression, multiply-add and memory counts for
//! dense (FC), block-term (BT) and tensor-train (TT) linear layers.
//!
//! Multiply-add counts follow the exact contraction schedule used by
//! [`BtLayer`](crate::BtLayer), so they can be checked against the
//! instrumented counter in [`crate::tensor::instrument`]. One multiply-add is
//! two flops. Memory is the largest single buffer (weights or per-sample
//! intermediates) in scalar slots.

use std::fmt;
use std::ops::RangeInclusive;

use num_rational::Ratio;
use serde::Serialize;

use crate::bt::{bt_param_count, BtConfig};
use crate::error::{Error, Result};

fn fit(v: u128, what: &str) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::Overflow(format!("{what} exceeds u64")))
}

fn product(dims: &[usize]) -> u128 {
    dims.iter().map(|&v| v as u128).product()
}

fn check_modes(in_modes: &[usize], out_modes: &[usize]) -> Result<()> {
    if in_modes.is_empty() || in_modes.len() != out_modes.len() {
        return Err(Error::dim(format!(
            "input and output modes must have the same non-zero order, got {} and {}",
            in_modes.len(),
            out_modes.len()
        )));
    }
    if in_modes.iter().chain(out_modes).any(|&m| m == 0) {
        return Err(Error::arg("mode lengths must be positive"));
    }
    Ok(())
}

/// `prod_k I_k J_k`.
pub fn fc_params(in_modes: &[usize], out_modes: &[usize]) -> Result<u64> {
    check_modes(in_modes, out_modes)?;
    in_modes
        .iter()
        .chain(out_modes)
        .try_fold(1u64, |acc, &m| acc.checked_mul(m as u64))
        .ok_or_else(|| Error::Overflow("dense parameter count".into()))
}

fn check_tt_ranks(d: usize, ranks: &[usize]) -> Result<()> {
    if ranks.len() != d + 1 {
        return Err(Error::arg(format!("need {} TT ranks for order {d}, got {}", d + 1, ranks.len())));
    }
    if ranks[0] != 1 || ranks[d] != 1 {
        return Err(Error::arg(format!(
            "boundary TT ranks must be 1, got {} and {}",
            ranks[0], ranks[d]
        )));
    }
    if ranks.contains(&0) {
        return Err(Error::arg("TT ranks must be positive"));
    }
    Ok(())
}

/// `sum_k I_k J_k R_{k-1} R_k` with `ranks = [R_0, .., R_d]`, `R_0 = R_d = 1`.
pub fn tt_params(in_modes: &[usize], out_modes: &[usize], ranks: &[usize]) -> Result<u64> {
    check_modes(in_modes, out_modes)?;
    check_tt_ranks(in_modes.len(), ranks)?;
    let total: u128 = (0..in_modes.len())
        .map(|k| in_modes[k] as u128 * out_modes[k] as u128 * ranks[k] as u128 * ranks[k + 1] as u128)
        .sum();
    fit(total, "TT parameter count")
}

/// Dense-over-factored parameter ratio, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionRatio(pub Ratio<u64>);

impl CompressionRatio {
    pub fn new(dense: u64, factored: u64) -> Result<Self> {
        if factored == 0 {
            return Err(Error::arg("factored parameter count must be positive"));
        }
        Ok(Self(Ratio::new(dense, factored)))
    }

    pub fn floor(&self) -> u64 {
        self.0.to_integer()
    }

    /// Published ratios mix floor and rounding, so comparisons allow one unit.
    pub fn matches_within_one(&self, reference: u64) -> bool {
        self.floor().abs_diff(reference) <= 1
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} (floor {})", self.0.numer(), self.0.denom(), self.floor())
    }
}

/// `P_FC / P_BTD` for a BT configuration.
pub fn compression_ratio(cfg: &BtConfig) -> Result<CompressionRatio> {
    let dense = fc_params(cfg.in_modes().dims(), cfg.out_modes().dims())?;
    CompressionRatio::new(dense, bt_param_count(cfg)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Fc,
    Bt { cp_rank: usize, tucker_rank: usize },
    Tt { ranks: Vec<usize> },
}

impl LayerKind {
    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Fc => "FC",
            LayerKind::Bt { .. } => "BT",
            LayerKind::Tt { .. } => "TT",
        }
    }
}

/// Asymptotic rows of the usual complexity table, with unit constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Envelope {
    pub fwd: u64,
    pub bwd: u64,
    pub mem: u64,
}

/// Per-sample cost of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Estimate {
    pub kind: LayerKind,
    pub params: u64,
    pub fwd_macs: u64,
    pub bwd_macs: u64,
    pub fwd_flops: u64,
    pub bwd_flops: u64,
    pub fwd_mem: u64,
    pub bwd_mem: u64,
    pub envelope: Envelope,
}

impl Estimate {
    /// Multiply-adds for a batch of `b` samples.
    pub fn batch_fwd_macs(&self, b: usize) -> u128 {
        self.fwd_macs as u128 * b as u128
    }

    pub fn batch_bwd_macs(&self, b: usize) -> u128 {
        self.bwd_macs as u128 * b as u128
    }
}

/// Sizes of the BT forward chain for one block and one sample:
/// entry `k` is the element count of the intermediate after `k` factors.
fn bt_chain_sizes(in_modes: &[usize], out_modes: &[usize], r: usize) -> Vec<u128> {
    let d = in_modes.len();
    (0..=d)
        .map(|k| product(&in_modes[k..]) * product(&out_modes[..k]) * (r as u128).pow(k as u32))
        .collect()
}

/// Multiply-adds of factor contraction `k` (1-based): output size times `I_k`.
fn bt_chain_macs(in_modes: &[usize], out_modes: &[usize], r: usize) -> Vec<u128> {
    let sizes = bt_chain_sizes(in_modes, out_modes, r);
    (1..sizes.len()).map(|k| sizes[k] * in_modes[k - 1] as u128).collect()
}

fn tt_chain_sizes(in_modes: &[usize], out_modes: &[usize], ranks: &[usize]) -> Vec<u128> {
    (0..=in_modes.len())
        .map(|k| product(&in_modes[k..]) * product(&out_modes[..k]) * ranks[k] as u128)
        .collect()
}

/// Cost of one layer of `kind` mapping `prod(in_modes)` to `prod(out_modes)`.
pub fn flop_mem_estimate(kind: &LayerKind, in_modes: &[usize], out_modes: &[usize]) -> Result<Estimate> {
    check_modes(in_modes, out_modes)?;
    let d = in_modes.len();
    let i = product(in_modes);
    let j = product(out_modes);
    let j_max = *out_modes.iter().max().expect("non-empty") as u128;
    let (params, fwd, bwd, fwd_mem, bwd_mem, env): (u64, u128, u128, u128, u128, [u128; 3]) = match kind {
        LayerKind::Fc => {
            let ij = i * j;
            (fc_params(in_modes, out_modes)?, ij, 2 * ij, ij, ij, [ij, 2 * ij, ij])
        }
        LayerKind::Bt { cp_rank, tucker_rank } => {
            let cfg = BtConfig::new(in_modes.to_vec(), out_modes.to_vec(), *cp_rank, *tucker_rank, false)?;
            let (n, r) = (*cp_rank as u128, *tucker_rank as u128);
            let rd = r.pow(d as u32);
            let chain: u128 = bt_chain_macs(in_modes, out_modes, *tucker_rank).iter().sum();
            // backward: recompute, factor grads and input grads each cost one
            // chain; core grad and the upstream-core outer product each J R^d
            let fwd = n * (chain + j * rd);
            let bwd = n * (3 * chain + 2 * j * rd);
            let sizes = bt_chain_sizes(in_modes, out_modes, *tucker_rank);
            let largest_factor = (0..d).map(|k| in_modes[k] as u128 * out_modes[k] as u128 * r).max().unwrap_or(0);
            let weights = largest_factor.max(rd);
            let live = *sizes.iter().max().expect("non-empty");
            let fwd_mem = weights.max(live).max(j);
            // backward keeps every chain intermediate alive next to the largest
            // gradient buffer of the same shape
            let retained: u128 = sizes.iter().sum();
            let bwd_mem = weights.max(retained + live).max(j);
            let env_fwd = n * d as u128 * i * j_max * rd;
            (
                bt_param_count(&cfg)?,
                fwd,
                bwd,
                fwd_mem,
                bwd_mem,
                [env_fwd, env_fwd * d as u128, rd * i],
            )
        }
        LayerKind::Tt { ranks } => {
            check_tt_ranks(d, ranks)?;
            let sizes = tt_chain_sizes(in_modes, out_modes, ranks);
            let fwd: u128 = (1..=d).map(|k| sizes[k] * in_modes[k - 1] as u128 * ranks[k - 1] as u128).sum();
            let cores = (0..d)
                .map(|k| ranks[k] as u128 * in_modes[k] as u128 * out_modes[k] as u128 * ranks[k + 1] as u128)
                .max()
                .unwrap_or(0);
            let live = *sizes.iter().max().expect("non-empty");
            let retained: u128 = sizes.iter().sum();
            let r = *ranks.iter().max().expect("non-empty") as u128;
            let dd = d as u128;
            (
                tt_params(in_modes, out_modes, ranks)?,
                fwd,
                3 * fwd,
                cores.max(live),
                cores.max(retained + live),
                [dd * i * r * r * j_max, dd * dd * i * r.pow(4) * j_max, r * i],
            )
        }
    };
    Ok(Estimate {
        kind: kind.clone(),
        params,
        fwd_macs: fit(fwd, "forward multiply-adds")?,
        bwd_macs: fit(bwd, "backward multiply-adds")?,
        fwd_flops: fit(2 * fwd, "forward flops")?,
        bwd_flops: fit(2 * bwd, "backward flops")?,
        fwd_mem: fit(fwd_mem, "forward memory")?,
        bwd_mem: fit(bwd_mem, "backward memory")?,
        envelope: Envelope {
            fwd: fit(env[0], "forward envelope")?,
            bwd: fit(env[1], "backward envelope")?,
            mem: fit(env[2], "memory envelope")?,
        },
    })
}

/// Side-by-side FC / BT / TT costs for one layer shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub config: String,
    pub fc: Estimate,
    pub bt: Estimate,
    pub tt: Option<Estimate>,
    #[serde(skip)]
    pub bt_ratio: CompressionRatio,
    #[serde(skip)]
    pub tt_ratio: Option<CompressionRatio>,
}

impl CostReport {
    pub fn new(cfg: &BtConfig, tt_ranks: Option<&[usize]>) -> Result<Self> {
        let (im, om) = (cfg.in_modes().dims(), cfg.out_modes().dims());
        let fc = flop_mem_estimate(&LayerKind::Fc, im, om)?;
        let bt = flop_mem_estimate(
            &LayerKind::Bt {
                cp_rank: cfg.cp_rank(),
                tucker_rank: cfg.tucker_rank(),
            },
            im,
            om,
        )?;
        let tt = tt_ranks
            .map(|r| flop_mem_estimate(&LayerKind::Tt { ranks: r.to_vec() }, im, om))
            .transpose()?;
        let bt_ratio = CompressionRatio::new(fc.params, bt.params)?;
        let tt_ratio = tt.as_ref().map(|t| CompressionRatio::new(fc.params, t.params)).transpose()?;
        Ok(Self {
            config: cfg.to_string(),
            fc,
            bt,
            tt,
            bt_ratio,
            tt_ratio,
        })
    }

    pub fn estimates(&self) -> Vec<&Estimate> {
        let mut v = vec![&self.fc, &self.bt];
        v.extend(self.tt.as_ref());
        v
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "layer",
            "params",
            "ratio",
            "ratio_floor",
            "fwd_flops",
            "bwd_flops",
            "fwd_mem",
            "bwd_mem",
            "env_fwd",
            "env_bwd",
            "env_mem",
        ]);
        for e in self.estimates() {
            let ratio = match e.kind {
                LayerKind::Fc => Some(CompressionRatio(Ratio::from_integer(1))),
                LayerKind::Bt { .. } => Some(self.bt_ratio),
                LayerKind::Tt { .. } => self.tt_ratio,
            }
            .expect("ratio present for every estimate");
            t.push(vec![
                e.kind.label().to_string(),
                e.params.to_string(),
                format!("{}/{}", ratio.0.numer(), ratio.0.denom()),
                ratio.floor().to_string(),
                e.fwd_flops.to_string(),
                e.bwd_flops.to_string(),
                e.fwd_mem.to_string(),
                e.bwd_mem.to_string(),
                e.envelope.fwd.to_string(),
                e.envelope.bwd.to_string(),
                e.envelope.mem.to_string(),
            ]);
        }
        t
    }
}

/// Splits `n` into `d` factors by dealing its prime factors, largest first,
/// round-robin over the bins. Bins that receive nothing stay at 1.
pub fn balanced_factorization(n: usize, d: usize) -> Result<Vec<usize>> {
    if n == 0 || d == 0 {
        return Err(Error::arg("balanced factorization needs n >= 1 and d >= 1"));
    }
    let mut primes = Vec::new();
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        while rest.is_multiple_of(p) {
            primes.push(p);
            rest /= p;
        }
        p += 1;
    }
    if rest > 1 {
        primes.push(rest);
    }
    primes.sort_unstable_by(|a, b| b.cmp(a));
    let mut bins = vec![1usize; d];
    for (idx, prime) in primes.into_iter().enumerate() {
        bins[idx % d] *= prime;
    }
    bins.sort_unstable_by(|a, b| b.cmp(a));
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub order: usize,
    pub tucker_rank: usize,
    pub in_modes: Vec<usize>,
    pub out_modes: Vec<usize>,
    pub params: u64,
    /// Some mode had to be 1: the requested order is not reachable exactly.
    pub degenerate: bool,
}

/// BT parameter counts over a grid of core orders and Tucker ranks.
pub fn param_curve(
    in_size: usize,
    out_size: usize,
    cp_rank: usize,
    orders: RangeInclusive<usize>,
    ranks: RangeInclusive<usize>,
) -> Result<Vec<CurvePoint>> {
    if cp_rank == 0 || *ranks.start() == 0 || *orders.start() == 0 {
        return Err(Error::arg("cp rank, tucker rank and order must be positive"));
    }
    let mut out = Vec::new();
    for r in ranks {
        for d in orders.clone() {
            let im = balanced_factorization(in_size, d)?;
            let om = balanced_factorization(out_size, d)?;
            let overflow = || Error::Overflow(format!("parameter count at d={d} R={r}"));
            let factors: u128 = im.iter().zip(&om).map(|(&i, &j)| i as u128 * j as u128 * r as u128).sum();
            let core = (r as u128).checked_pow(d as u32).ok_or_else(overflow)?;
            let total = (factors + core).checked_mul(cp_rank as u128).ok_or_else(overflow)?;
            let degenerate = im.iter().chain(&om).any(|&m| m == 1) && in_size * out_size > 1;
            out.push(CurvePoint {
                order: d,
                tucker_rank: r,
                in_modes: im,
                out_modes: om,
                params: fit(total, "parameter count")?,
                degenerate,
            });
        }
    }
    Ok(out)
}

pub fn curve_table(points: &[CurvePoint]) -> Table {
    let mut t = Table::new(["d", "R", "in_modes", "out_modes", "params", "flag"]);
    let join = |v: &[usize]| v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",");
    for p in points {
        t.push(vec![
            p.order.to_string(),
            p.tucker_rank.to_string(),
            join(&p.in_modes),
            join(&p.out_modes),
            p.params.to_string(),
            if p.degenerate { "unbalanced".into() } else { String::new() },
        ]);
    }
    t
}

/// Minimal two-format table: aligned text or RFC-4180 CSV.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len(), "row width must match headers");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut s = line(&self.headers);
        for row in &self.rows {
            s += &line(row);
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format {
            path: "<csv>".into(),
            msg: e.to_string(),
        };
        w.write_record(&self.headers).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format {
            path: "<csv>".into(),
            msg: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
