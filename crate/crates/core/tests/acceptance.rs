//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p btnn-core --test acceptance`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use btnn::cost::{compression_ratio, fc_params, flop_mem_estimate, param_curve, tt_params, CompressionRatio, LayerKind};
use btnn::data::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_mnist, save_checkpoint, Split};
use btnn::gradcheck::{check_op, OPS};
use btnn::nn::{DenseLayer, TrainState};
use btnn::oracle::{oracle_sweep, relative_gap, ConfigLimits};
use btnn::rng::{seeded, uniform_tensor};
use btnn::tensor::instrument::count_macs;
use btnn::train::{
    copy_eval, mnist_accuracy, mnist_architecture, mnist_train_steps, steps_per_epoch, toy_digits, train_copy,
    CopyOptions, MnistOptions,
};
use btnn::{bt_param_count, BtConfig, BtLayer, DenseTensor, Scalar};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

type Modes = ([usize; 4], [usize; 4]);

const MNIST: Modes = ([5, 5, 8, 4], [5, 5, 5, 4]);
const CIFAR: Modes = ([6, 6, 8, 8], [6, 4, 4, 4]);
const IMAGENET: Modes = ([10, 10, 8, 8], [8, 8, 8, 8]);

/// (label, modes, N, R, published #params, published ratio)
fn bt_rows() -> Vec<(&'static str, Modes, usize, usize, u64, u64)> {
    vec![
        ("mnist N1 R2", MNIST, 1, 2, 228, 1754),
        ("mnist N1 R3", MNIST, 1, 3, 399, 1002),
        ("cifar N1 R2", CIFAR, 1, 2, 264, 3351),
        ("cifar N4 R2", CIFAR, 4, 2, 1056, 838),
        ("cifar N4 R3", CIFAR, 4, 3, 1812, 488),
        ("imagenet N1 R2", IMAGENET, 1, 2, 592, 44281),
        ("imagenet N4 R2", IMAGENET, 4, 2, 2368, 11070),
    ]
}

/// (label, modes, published #params, published ratio), interior ranks 2.
fn tt_rows() -> Vec<(&'static str, Modes, u64, u64)> {
    vec![("mnist TT R2", MNIST, 342, 1169), ("cifar TT R2", CIFAR, 360, 2457)]
}

fn config(modes: Modes, n: usize, r: usize) -> BtConfig {
    BtConfig::new(modes.0.to_vec(), modes.1.to_vec(), n, r, false).expect("table configs are valid")
}

fn parameter_tables() -> Verdict {
    let mut bad = Vec::new();
    for (label, modes, n, r, want, _) in bt_rows() {
        let got = bt_param_count(&config(modes, n, r)).unwrap();
        if got != want {
            bad.push(format!("{label}: {got} != {want}"));
        }
    }
    for (label, modes, want, _) in tt_rows() {
        let got = tt_params(&modes.0, &modes.1, &[1, 2, 2, 2, 1]).unwrap();
        if got != want {
            bad.push(format!("{label}: {got} != {want}"));
        }
    }
    let n = bt_rows().len() + tt_rows().len();
    verdict(bad.is_empty(), format!("{n} published counts, exact; mismatches: {bad:?}"))
}

fn compression_ratios() -> Verdict {
    let mut bad = Vec::new();
    let mut worst = 0u64;
    let mut check = |label: &str, r: CompressionRatio, want: u64| {
        worst = worst.max(r.floor().abs_diff(want));
        if !r.matches_within_one(want) {
            bad.push(format!("{label}: floor {} vs {want}", r.floor()));
        }
    };
    for (label, modes, n, r, _, want) in bt_rows() {
        check(label, compression_ratio(&config(modes, n, r)).unwrap(), want);
    }
    for (label, modes, _, want) in tt_rows() {
        let dense = fc_params(&modes.0, &modes.1).unwrap();
        let tt = tt_params(&modes.0, &modes.1, &[1, 2, 2, 2, 1]).unwrap();
        check(label, CompressionRatio::new(dense, tt).unwrap(), want);
    }
    verdict(bad.is_empty(), format!("9 ratios within +-1 (largest gap {worst}); mismatches: {bad:?}"))
}

fn oracle_equivalence() -> Verdict {
    let limits = ConfigLimits::default();
    let t = Instant::now();
    let f64s = oracle_sweep::<f64>(2024, 1000, &limits).unwrap();
    let f32s = oracle_sweep::<f32>(2025, 1000, &limits).unwrap();
    let secs = t.elapsed().as_secs_f64();
    verdict(
        f64s.passed() && f32s.passed() && secs < 60.0,
        format!(
            "1000 configs each: f64 max rel err {:.2e} (<= 1e-12), f32 {:.2e} (<= 1e-5), {secs:.1} s (< 60 s)",
            f64s.max_rel_err, f32s.max_rel_err
        ),
    )
}

fn gradient_suite() -> Verdict {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for op in OPS {
        let r = check_op(op, 0, 100, false).unwrap();
        pass &= r.passed() && r.seeds >= 100;
        lines.push(format!("{op} {:.1e}", r.worst));
        if let Some(m) = r.failures.first() {
            lines.push(format!("first failure {m}"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    verdict(
        pass,
        format!("100 seeds per op, h 1e-5, rel 1e-4 / abs 1e-8, {secs:.1} s; worst: {}", lines.join(", ")),
    )
}

fn fc_fallback() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut rng = seeded(55);
    for (i, j) in [(1, 1), (3, 2), (7, 5), (16, 9), (40, 30)] {
        for r in 1..=3usize.min(i.min(j).max(1)) {
            let cfg = BtConfig::new(vec![i], vec![j], 1, r, true).unwrap();
            let mut bt = BtLayer::<f64>::init(cfg.clone(), &mut rng).unwrap();
            bt.params_mut().bias = Some(uniform_tensor(&mut rng, &[j], 1.0).unwrap());
            let dense = DenseLayer::new(bt.reconstruct().unwrap(), bt.params().bias.clone().unwrap()).unwrap();
            let x: DenseTensor<f64> = uniform_tensor(&mut rng, &[4, i], 1.0).unwrap();
            worst = worst.max(relative_gap(&bt.forward(&x).unwrap(), &dense.forward(&x).unwrap()));
        }
    }
    verdict(worst <= 1e-12, format!("d=1, N=1 layers vs dense reconstruction: max rel err {worst:.2e} (<= 1e-12)"))
}

fn flop_model() -> Verdict {
    let mut bad = Vec::new();
    let mut rng = seeded(8);
    for (label, modes, n, r, _, _) in bt_rows() {
        let cfg = config(modes, n, r);
        let est = flop_mem_estimate(&LayerKind::Bt { cp_rank: n, tucker_rank: r }, &modes.0, &modes.1).unwrap();
        let layer = BtLayer::<f32>::init(cfg.clone(), &mut rng).unwrap();
        for batch in [1, 2] {
            let x: DenseTensor<f32> = uniform_tensor(&mut rng, &[batch, cfg.in_size()], 1.0).unwrap();
            let (_, macs) = count_macs(|| layer.forward(&x).unwrap());
            if est.batch_fwd_macs(batch) != macs as u128 {
                bad.push(format!("{label} B={batch}: model {} vs measured {macs}", est.batch_fwd_macs(batch)));
            }
        }
    }
    let curve = param_curve(4096, 256, 1, 1..=8, 1..=4).unwrap();
    let series = |r: usize| curve.iter().filter(|p| p.tucker_rank == r).map(|p| p.params).collect::<Vec<_>>();
    let r1 = series(1);
    let non_increasing = r1.windows(2).all(|w| w[1] <= w[0]);
    let mut interior = Vec::new();
    for r in 2..=4 {
        let s = series(r);
        let at = (0..s.len()).min_by_key(|&i| s[i]).unwrap();
        interior.push((r, at + 1, at > 0 && at + 1 < s.len()));
    }
    let shape_ok = non_increasing && interior.iter().all(|t| t.2);
    verdict(
        bad.is_empty() && shape_ok,
        format!(
            "forward flop model exact on {} table configs x 2 batches; mismatches {bad:?}; \
             curve I=4096 J=256: R=1 non-increasing {non_increasing}, minimum d for R=2..4 {:?}",
            bt_rows().len(),
            interior.iter().map(|t| t.1).collect::<Vec<_>>()
        ),
    )
}

fn mnist_dir() -> Option<PathBuf> {
    std::env::var_os("BTNN_DATA_DIR")
        .map(PathBuf::from)
        .into_iter()
        .chain([PathBuf::from("/root/data/mnist")])
        .find(|d| d.join("train-images-idx3-ubyte").exists())
}

fn mnist_training() -> Verdict {
    let Some(dir) = mnist_dir() else {
        return verdict(false, "MNIST not found (set BTNN_DATA_DIR); criterion not evaluated");
    };
    let t = Instant::now();
    let train = load_mnist::<f32>(&dir, Split::Train).unwrap();
    let test = load_mnist::<f32>(&dir, Split::Test).unwrap();
    let opts = MnistOptions::default();
    let spe = steps_per_epoch(train.len(), opts.batch_size).unwrap();
    let mut state = TrainState::<f32>::new(&mnist_architecture(1, 2).unwrap(), 0).unwrap();
    let mut history = Vec::new();
    for _ in 0..10 {
        mnist_train_steps(&mut state, &train, &opts, spe).unwrap();
        let acc = mnist_accuracy(&state, &test).unwrap();
        history.push(format!("{:.4}", acc));
        if acc >= 0.95 {
            break;
        }
    }
    let last: f64 = history.last().unwrap().parse().unwrap();
    let secs = t.elapsed().as_secs_f64();
    verdict(
        last >= 0.95 && secs < 900.0,
        format!(
            "BT (5,5,8,4)->(5,5,5,4) N=1 R=2, batch {}, lr {}: test accuracy per epoch {history:?} (>= 0.95 within 10), {secs:.0} s",
            opts.batch_size, opts.lr
        ),
    )
}

fn copy_training() -> Verdict {
    let opts = CopyOptions::default();
    let t = Instant::now();
    let mut state = TrainState::<f32>::new(&opts.architecture().unwrap(), 0).unwrap();
    train_copy(&mut state, &opts, |_| {}).unwrap();
    let (loss, acc) = copy_eval(&state, &opts).unwrap();
    let secs = t.elapsed().as_secs_f64();
    verdict(
        loss < opts.target_loss() && secs < 300.0,
        format!(
            "lag {} alphabet {} after {} steps: held-out loss {loss:.4} (< {:.4}), accuracy {acc:.3}, {secs:.0} s",
            opts.lag,
            opts.alphabet(),
            opts.steps,
            opts.target_loss()
        ),
    )
}

fn bits_equal<T: Scalar>(a: &TrainState<T>, b: &TrainState<T>) -> bool {
    encode_checkpoint(a).unwrap() == encode_checkpoint(b).unwrap() && a == b
}

fn persistence() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("resume.ckpt");

    // MNIST classifier: 2 steps, checkpoint, 2 more vs 4 straight
    let data = toy_digits::<f32>(3, 256).unwrap();
    let opts = MnistOptions {
        batch_size: 32,
        ..MnistOptions::default()
    };
    let arch = mnist_architecture(1, 2).unwrap();
    let mut straight = TrainState::<f32>::new(&arch, 17).unwrap();
    mnist_train_steps(&mut straight, &data, &opts, 4).unwrap();
    let mut first = TrainState::<f32>::new(&arch, 17).unwrap();
    mnist_train_steps(&mut first, &data, &opts, 2).unwrap();
    save_checkpoint(&path, &first).unwrap();
    let mut resumed = load_checkpoint::<f32>(&path).unwrap();
    mnist_train_steps(&mut resumed, &data, &opts, 2).unwrap();
    let mlp_resume = bits_equal(&straight, &resumed);

    // copy task draws batches from the checkpointed generator
    let copy = CopyOptions {
        steps: 4,
        ..CopyOptions::default()
    };
    let arch = copy.architecture().unwrap();
    let mut straight = TrainState::<f64>::new(&arch, 5).unwrap();
    train_copy(&mut straight, &copy, |_| {}).unwrap();
    let mut first = TrainState::<f64>::new(&arch, 5).unwrap();
    train_copy(&mut first, &CopyOptions { steps: 2, ..copy.clone() }, |_| {}).unwrap();
    save_checkpoint(&path, &first).unwrap();
    let mut resumed = load_checkpoint::<f64>(&path).unwrap();
    train_copy(&mut resumed, &copy, |_| {}).unwrap();
    let lstm_resume = bits_equal(&straight, &resumed);

    let round_trip = |bytes: Vec<u8>, f32s: bool| {
        if f32s {
            let s = decode_checkpoint::<f32>(&bytes).unwrap();
            encode_checkpoint(&s).unwrap() == bytes
        } else {
            let s = decode_checkpoint::<f64>(&bytes).unwrap();
            encode_checkpoint(&s).unwrap() == bytes
        }
    };
    let rt32 = round_trip(encode_checkpoint(&first_mlp_state::<f32>()).unwrap(), true);
    let rt64 = round_trip(encode_checkpoint(&straight).unwrap(), false);
    verdict(
        mlp_resume && lstm_resume && rt32 && rt64,
        format!(
            "2+2 resumed steps bit-identical to 4 straight: classifier {mlp_resume}, BT-LSTM {lstm_resume}; \
             save/load/save byte-identical: f32 {rt32}, f64 {rt64}"
        ),
    )
}

fn first_mlp_state<T: Scalar>() -> TrainState<T> {
    let data = toy_digits::<T>(4, 64).unwrap();
    let mut s = TrainState::<T>::new(&mnist_architecture(1, 2).unwrap(), 2).unwrap();
    let opts = MnistOptions {
        batch_size: 16,
        ..MnistOptions::default()
    };
    mnist_train_steps(&mut s, &data, &opts, 3).unwrap();
    s
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 8] = [
        ("parameter tables", parameter_tables),
        ("compression ratios", compression_ratios),
        ("oracle equivalence", oracle_equivalence),
        ("gradient suite", gradient_suite),
        ("FC fallback", fc_fallback),
        ("flop model and parameter curve", flop_model),
        ("training smoke (MNIST, BT-LSTM copy)", || {
            let a = mnist_training();
            let b = copy_training();
            verdict(a.pass && b.pass, format!("MNIST: {}; copy: {}", a.detail, b.detail))
        }),
        ("determinism and persistence", persistence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
