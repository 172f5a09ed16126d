use anyhow::{ensure, Result};
use btnn::cost::{curve_table, param_curve, CostReport, Table};

use super::bt_config;
use crate::output::{print_table, Format};
use crate::{LayerArgs, Outcome};

pub fn params(format: Format, layer: &LayerArgs, tt_ranks: Option<&[usize]>) -> Result<Outcome> {
    let report = CostReport::new(&bt_config(layer, false)?, tt_ranks)?;
    let mut t = Table::new(["layer", "params", "ratio", "ratio_floor"]);
    t.push(vec!["FC".into(), report.fc.params.to_string(), "1/1".into(), "1".into()]);
    let mut ratio_row = |label: &str, params: u64, r: btnn::cost::CompressionRatio| {
        t.push(vec![
            label.into(),
            params.to_string(),
            format!("{}/{}", r.0.numer(), r.0.denom()),
            r.floor().to_string(),
        ])
    };
    ratio_row("BT", report.bt.params, report.bt_ratio);
    if let (Some(tt), Some(r)) = (&report.tt, report.tt_ratio) {
        ratio_row("TT", tt.params, r);
    }
    print_table(format, &t)?;
    Ok(Outcome::Success)
}

pub fn cost(format: Format, layer: &LayerArgs, tt_ranks: Option<&[usize]>) -> Result<Outcome> {
    let report = CostReport::new(&bt_config(layer, false)?, tt_ranks)?;
    print_table(format, &report.table())?;
    Ok(Outcome::Success)
}

pub fn curve(
    format: Format,
    in_size: usize,
    out_size: usize,
    cp_rank: usize,
    max_order: usize,
    max_rank: usize,
) -> Result<Outcome> {
    ensure!(max_order >= 1 && max_rank >= 1, "--max-order and --max-rank must be at least 1");
    let points = param_curve(in_size, out_size, cp_rank, 1..=max_order, 1..=max_rank)?;
    print_table(format, &curve_table(&points))?;
    if points.iter().any(|p| p.degenerate) {
        eprintln!("note: rows flagged 'unbalanced' needed modes of length 1 to reach the requested order");
    }
    Ok(Outcome::Success)
}
