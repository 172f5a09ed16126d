use anyhow::{bail, Result};
use btnn::cost::Table;
use btnn::gradcheck::{run_suite, SuiteOptions, REL_TOL};
use btnn::oracle::{oracle_sweep, oracle_trial, ConfigLimits, OracleSummary};
use btnn::rng::seeded;
use btnn::Precision;

use super::bt_config;
use crate::output::{print_table, Format};
use crate::{LayerArgs, Outcome};

pub fn gradcheck(
    format: Format,
    seed: u64,
    seeds: usize,
    ops: Vec<String>,
    precision: Precision,
    corrupt: Option<String>,
) -> Result<Outcome> {
    if precision != Precision::F64 {
        bail!("gradient checks run in f64 only; central differences at h = 1e-5 are noise in f32");
    }
    let reports = run_suite(&SuiteOptions {
        seed,
        seeds_per_op: seeds,
        ops,
        corrupt,
    })?;
    let mut t = Table::new(["op", "cases", "scalars", "worst_rel_err", "status"]);
    for r in &reports {
        t.push(vec![
            r.op.clone(),
            r.seeds.to_string(),
            r.scalars.to_string(),
            format!("{:.3e}", r.worst),
            if r.passed() { "pass" } else { "FAIL" }.into(),
        ]);
    }
    print_table(format, &t)?;
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    for r in &failed {
        eprintln!("{}: {} entries beyond {REL_TOL:e}", r.op, r.failure_count);
        for m in &r.failures {
            eprintln!("  {m}");
        }
    }
    Ok(if failed.is_empty() { Outcome::Success } else { Outcome::CheckFailed })
}

#[allow(clippy::too_many_arguments)]
pub fn oracle(
    format: Format,
    seed: u64,
    trials: usize,
    precision: Precision,
    batch: usize,
    fixed: Option<LayerArgs>,
    zero_input: bool,
    cap: usize,
) -> Result<Outcome> {
    let summary = match &fixed {
        Some(layer) => {
            let cfg = bt_config(layer, true)?;
            let needed = cfg.in_size().saturating_mul(cfg.out_size());
            if needed > cap {
                bail!("dense reconstruction needs {needed} scalars, above the cap of {cap}");
            }
            let mut rng = seeded(seed);
            let mut worst: f64 = 0.0;
            for _ in 0..trials {
                let e = match precision {
                    Precision::F64 => oracle_trial::<f64>(&cfg, &mut rng, batch, zero_input)?,
                    Precision::F32 => oracle_trial::<f32>(&cfg, &mut rng, batch, zero_input)?,
                };
                worst = worst.max(e);
            }
            OracleSummary {
                precision,
                trials,
                max_rel_err: worst,
                worst_config: Some(cfg),
            }
        }
        None => {
            if zero_input {
                bail!("--zero-input needs a fixed layer (--in-modes/--out-modes)");
            }
            let limits = ConfigLimits::default();
            match precision {
                Precision::F64 => oracle_sweep::<f64>(seed, trials, &limits)?,
                Precision::F32 => oracle_sweep::<f32>(seed, trials, &limits)?,
            }
        }
    };
    let mut t = Table::new(["precision", "trials", "max_rel_err", "threshold", "worst_config", "status"]);
    t.push(vec![
        precision.to_string(),
        summary.trials.to_string(),
        format!("{:.3e}", summary.max_rel_err),
        format!("{:e}", OracleSummary::threshold(precision)),
        summary.worst_config.as_ref().map(|c| c.to_string()).unwrap_or_default(),
        if summary.passed() { "pass" } else { "FAIL" }.into(),
    ]);
    print_table(format, &t)?;
    Ok(if summary.passed() { Outcome::Success } else { Outcome::CheckFailed })
}
