use std::time::Instant;

use anyhow::Result;
use btnn::cost::{flop_mem_estimate, LayerKind, Table};
use btnn::nn::DenseLayer;
use btnn::rng::{seeded, uniform_tensor};
use btnn::tensor::instrument::count_macs;
use btnn::{BtLayer, DenseTensor, Precision, Scalar};

use super::bt_config;
use crate::output::{print_table, timing, Format};
use crate::{LayerArgs, Outcome};

fn median_seconds(iters: usize, warmup: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(iters);
    for _ in 0..iters.max(1) {
        let t = Instant::now();
        f()?;
        samples.push(t.elapsed().as_secs_f64());
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

fn run<T: Scalar>(format: Format, layer: &LayerArgs, batch: usize, iters: usize, warmup: usize, seed: u64) -> Result<Outcome> {
    let cfg = bt_config(layer, false)?;
    let (i, j) = (cfg.in_size(), cfg.out_size());
    let mut rng = seeded(seed);
    let bt = BtLayer::<T>::init(cfg.clone(), &mut rng)?;
    let fc = DenseLayer::<T>::init(i, j, &mut rng)?;
    let x: DenseTensor<T> = uniform_tensor(&mut rng, &[batch, i], 1.0)?;

    let (_, bt_macs) = count_macs(|| bt.forward(&x));
    let (_, fc_macs) = count_macs(|| fc.forward(&x));
    let bt_est = flop_mem_estimate(
        &LayerKind::Bt {
            cp_rank: cfg.cp_rank(),
            tucker_rank: cfg.tucker_rank(),
        },
        &layer.in_modes,
        &layer.out_modes,
    )?;
    let fc_est = flop_mem_estimate(&LayerKind::Fc, &layer.in_modes, &layer.out_modes)?;

    let mut t = Table::new(["layer", "params", "predicted_flops", "measured_flops", "match"]);
    let mut all_match = true;
    for (name, est, macs) in [("FC", &fc_est, fc_macs), ("BT", &bt_est, bt_macs)] {
        let predicted = 2 * est.batch_fwd_macs(batch);
        let measured = 2 * macs as u128;
        all_match &= predicted == measured;
        t.push(vec![
            name.into(),
            est.params.to_string(),
            predicted.to_string(),
            measured.to_string(),
            if predicted == measured { "yes" } else { "NO" }.into(),
        ]);
    }
    print_table(format, &t)?;
    let ratio = fc_est.fwd_flops as f64 / bt_est.fwd_flops as f64;
    match format {
        Format::Text => println!("predicted FC/BT forward flop ratio: {ratio:.3}"),
        Format::Csv => println!("predicted_flop_ratio,{ratio:.6}"),
    }

    let fc_time = median_seconds(iters, warmup, || fc.forward(&x).map(drop).map_err(Into::into))?;
    let bt_time = median_seconds(iters, warmup, || bt.forward(&x).map(drop).map_err(Into::into))?;
    timing(format, "fc_forward_median", fc_time, "s");
    timing(format, "bt_forward_median", bt_time, "s");
    timing(format, "measured_speedup", fc_time / bt_time, "x");
    Ok(if all_match { Outcome::Success } else { Outcome::CheckFailed })
}

pub fn bench(
    format: Format,
    layer: &LayerArgs,
    batch: usize,
    iters: usize,
    warmup: usize,
    seed: u64,
    precision: Precision,
) -> Result<Outcome> {
    match precision {
        Precision::F32 => run::<f32>(format, layer, batch, iters, warmup, seed),
        Precision::F64 => run::<f64>(format, layer, batch, iters, warmup, seed),
    }
}
