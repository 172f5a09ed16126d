use std::env;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use btnn::data::{load_checkpoint, load_mnist, save_checkpoint, Split};
use btnn::nn::TrainState;
use btnn::train::{mnist_architecture, train_copy, train_mnist, CopyOptions, MnistOptions};
use btnn::{Precision, Scalar};

use crate::output::{timing, Format, RowStream};
use crate::{CopyArgs, MnistArgs, Outcome};

pub const DATA_DIR_ENV: &str = "BTNN_DATA_DIR";

fn data_dir(arg: &Option<PathBuf>) -> Result<PathBuf> {
    arg.clone()
        .or_else(|| env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| anyhow!("no MNIST directory: pass --data-dir or set {DATA_DIR_ENV}"))
}

fn mnist_typed<T: Scalar>(format: Format, args: &MnistArgs) -> Result<Outcome> {
    let dir = data_dir(&args.data_dir)?;
    let mut train = load_mnist::<T>(&dir, Split::Train).with_context(|| format!("loading MNIST from {}", dir.display()))?;
    let mut test = load_mnist::<T>(&dir, Split::Test).with_context(|| format!("loading MNIST from {}", dir.display()))?;
    if let Some(n) = args.train_limit {
        train = train.truncated(n)?;
    }
    if let Some(n) = args.test_limit {
        test = test.truncated(n)?;
    }
    let mut state = match &args.resume {
        Some(path) => {
            let s = load_checkpoint::<T>(path).with_context(|| format!("resuming from {}", path.display()))?;
            eprintln!("resumed at step {} (seed {})", s.step, s.seed);
            s
        }
        None => TrainState::<T>::new(&mnist_architecture(args.cp_rank, args.tucker_rank)?, args.seed)?,
    };
    eprintln!(
        "training on {} images, testing on {}, {} precision",
        train.len(),
        test.len(),
        T::PRECISION
    );
    let opts = MnistOptions {
        epochs: args.epochs,
        batch_size: args.batch_size,
        lr: args.lr,
    };
    let rows = RowStream::start(format, &["epoch", "step", "train_loss", "test_accuracy"])?;
    let mut failure = None;
    train_mnist(&mut state, &train, &test, &opts, |log| {
        let cells = vec![
            log.epoch.to_string(),
            log.step.to_string(),
            log.train_loss.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into()),
            format!("{:.4}", log.test_accuracy),
        ];
        if let Err(e) = rows.emit(cells) {
            failure.get_or_insert(e);
        }
        timing(format, &format!("epoch_{}", log.epoch), log.seconds, "s");
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(path) = &args.checkpoint {
        save_checkpoint(path, &state).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("checkpoint written to {}", path.display());
    }
    Ok(Outcome::Success)
}

pub fn mnist(format: Format, args: &MnistArgs) -> Result<Outcome> {
    match args.precision {
        Precision::F32 => mnist_typed::<f32>(format, args),
        Precision::F64 => mnist_typed::<f64>(format, args),
    }
}

fn copy_typed<T: Scalar>(format: Format, args: &CopyArgs) -> Result<Outcome> {
    let opts = CopyOptions {
        in_modes: args.in_modes.clone(),
        gate_modes: args.gate_modes.clone(),
        hidden: args.hidden,
        cp_rank: args.cp_rank,
        tucker_rank: args.tucker_rank,
        lag: args.lag,
        seq_len: args.seq_len,
        batch_size: args.batch_size,
        lr: args.lr,
        steps: args.steps,
        log_every: args.log_every,
    };
    let mut state = match &args.resume {
        Some(path) => load_checkpoint::<T>(path).with_context(|| format!("resuming from {}", path.display()))?,
        None => TrainState::<T>::new(&opts.architecture()?, args.seed)?,
    };
    let rows = RowStream::start(format, &["step", "train_loss", "eval_loss", "eval_accuracy"])?;
    let mut failure = None;
    let logs = train_copy(&mut state, &opts, |log| {
        let cells = vec![
            log.step.to_string(),
            format!("{:.6}", log.train_loss),
            format!("{:.6}", log.eval_loss),
            format!("{:.4}", log.eval_accuracy),
        ];
        if let Err(e) = rows.emit(cells) {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(last) = logs.last() {
        timing(format, "train", last.seconds, "s");
        let reached = last.eval_loss < opts.target_loss();
        eprintln!(
            "final eval loss {:.4} vs target {:.4}: {}",
            last.eval_loss,
            opts.target_loss(),
            if reached { "reached" } else { "not reached" }
        );
    }
    if let Some(path) = &args.checkpoint {
        save_checkpoint(path, &state).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("checkpoint written to {}", path.display());
    }
    Ok(Outcome::Success)
}

pub fn copy(format: Format, args: &CopyArgs) -> Result<Outcome> {
    match args.precision {
        Precision::F32 => copy_typed::<f32>(format, args),
        Precision::F64 => copy_typed::<f64>(format, args),
    }
}
