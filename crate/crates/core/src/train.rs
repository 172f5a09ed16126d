//! Step-indexed training loops for the MNIST classifier and the copy task.
//!
//! The batch used at global step `s` depends only on the seed and `s`
//! (MNIST) or on the checkpointed generator (copy task), so a run resumed
//! from a checkpoint replays exactly what an uninterrupted run would do.

use std::time::Instant;

use crate::bt::BtConfig;
use crate::data::{synth_copy_task, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Network, TrainState};
use crate::rng::{permutation, stream};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

pub const MNIST_IN_MODES: [usize; 4] = [5, 5, 8, 4];
pub const MNIST_OUT_MODES: [usize; 4] = [5, 5, 5, 4];
pub const MNIST_PIXELS: usize = 784;
pub const MNIST_CLASSES: usize = 10;

/// `784 -> pad 800 (5,5,8,4) -> BT (5,5,5,4) -> batch norm -> relu -> dense 10`.
pub fn mnist_architecture(cp_rank: usize, tucker_rank: usize) -> Result<Architecture> {
    Ok(Architecture::BtMlp {
        input_width: MNIST_PIXELS,
        bt: BtConfig::new(MNIST_IN_MODES.to_vec(), MNIST_OUT_MODES.to_vec(), cp_rank, tucker_rank, false)?,
        classes: MNIST_CLASSES,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for MnistOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            lr: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: u64,
    /// Mean training loss over the epoch's steps; `None` for the pass at init.
    pub train_loss: Option<f64>,
    pub test_accuracy: f64,
    pub seconds: f64,
}

pub fn steps_per_epoch(samples: usize, batch_size: usize) -> Result<u64> {
    if batch_size < 2 {
        return Err(Error::arg("batch size must be at least 2 for batch norm"));
    }
    if samples < batch_size {
        return Err(Error::arg(format!("{samples} samples cannot fill one batch of {batch_size}")));
    }
    Ok((samples / batch_size) as u64)
}

fn mlp_network_check<T: Scalar>(state: &TrainState<T>) -> Result<()> {
    match &state.network {
        Network::Mlp(_) => Ok(()),
        Network::Copy(_) => Err(Error::arg("state holds a copy-task network, expected the MNIST classifier")),
    }
}

/// Sample indices for global step `step`: epoch `e` shuffles with stream `(seed, e)`.
pub fn mnist_batch_indices(seed: u64, samples: usize, batch_size: usize, step: u64) -> Result<Vec<usize>> {
    let spe = steps_per_epoch(samples, batch_size)?;
    let (epoch, within) = (step / spe, (step % spe) as usize);
    let order = permutation(&mut stream(seed, epoch), samples);
    Ok(order[within * batch_size..(within + 1) * batch_size].to_vec())
}

/// Runs `steps` optimizer steps from `state.step`; returns the mean loss.
pub fn mnist_train_steps<T: Scalar>(
    state: &mut TrainState<T>,
    train: &Dataset<T>,
    opts: &MnistOptions,
    steps: u64,
) -> Result<f64> {
    mlp_network_check(state)?;
    let mut total = 0.0;
    for _ in 0..steps {
        let idx = mnist_batch_indices(state.seed, train.len(), opts.batch_size, state.step)?;
        let x = train.inputs.select_rows(&idx)?;
        let labels: Vec<usize> = idx.iter().map(|&i| train.labels[i]).collect();
        let Network::Mlp(mlp) = &state.network else { unreachable!("checked above") };
        let (loss, grads, cache) = mlp.loss_and_grads(&x, &labels)?;
        state.apply_gradients(&grads, opts.lr)?;
        let Network::Mlp(mlp) = &mut state.network else { unreachable!("checked above") };
        mlp.bn.update_running_stats(&cache);
        total += loss.to_f64();
    }
    Ok(if steps == 0 { 0.0 } else { total / steps as f64 })
}

/// Eval-mode accuracy, in chunks to bound memory.
pub fn mnist_accuracy<T: Scalar>(state: &TrainState<T>, data: &Dataset<T>) -> Result<f64> {
    let Network::Mlp(mlp) = &state.network else {
        return Err(Error::arg("state holds a copy-task network, expected the MNIST classifier"));
    };
    const CHUNK: usize = 1000;
    let mut correct = 0usize;
    let all: Vec<usize> = (0..data.len()).collect();
    for rows in all.chunks(CHUNK) {
        let pred = mlp.predict(&data.inputs.select_rows(rows)?)?;
        correct += rows.iter().zip(pred).filter(|(&r, p)| data.labels[r] == *p).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Trains until `opts.epochs` full epochs are done, continuing from
/// `state.step`. An evaluation at the current step is logged first when no
/// epoch has been completed yet, so `epochs = 0` is an evaluation-only pass.
pub fn train_mnist<T: Scalar>(
    state: &mut TrainState<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    opts: &MnistOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    mlp_network_check(state)?;
    let mut logs = Vec::new();
    let start = Instant::now();
    if state.step == 0 {
        let log = EpochLog {
            epoch: 0,
            step: 0,
            train_loss: None,
            test_accuracy: mnist_accuracy(state, test)?,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        logs.push(log);
    }
    if opts.epochs == 0 {
        return Ok(logs);
    }
    let spe = steps_per_epoch(train.len(), opts.batch_size)?;
    let target = opts.epochs as u64 * spe;
    while state.step < target {
        let epoch_end = (state.step / spe + 1) * spe;
        let loss = mnist_train_steps(state, train, opts, epoch_end - state.step)?;
        let log = EpochLog {
            epoch: (state.step / spe) as usize,
            step: state.step,
            train_loss: Some(loss),
            test_accuracy: mnist_accuracy(state, test)?,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}

/// Copy-task sizes: one-hot alphabet of `prod(in_modes)` symbols, hidden
/// size `H` with `prod(gate_modes) = 4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyOptions {
    pub in_modes: Vec<usize>,
    pub gate_modes: Vec<usize>,
    pub hidden: usize,
    pub cp_rank: usize,
    pub tucker_rank: usize,
    pub lag: usize,
    pub seq_len: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub steps: u64,
    pub log_every: u64,
}

impl Default for CopyOptions {
    fn default() -> Self {
        Self {
            in_modes: vec![4, 4],
            gate_modes: vec![8, 16],
            hidden: 32,
            cp_rank: 2,
            tucker_rank: 4,
            lag: 2,
            seq_len: 12,
            batch_size: 32,
            lr: 0.5,
            steps: 1000,
            log_every: 100,
        }
    }
}

impl CopyOptions {
    pub fn architecture(&self) -> Result<Architecture> {
        Ok(Architecture::BtLstmCopy {
            input_map: BtConfig::new(
                self.in_modes.clone(),
                self.gate_modes.clone(),
                self.cp_rank,
                self.tucker_rank,
                false,
            )?,
            hidden: self.hidden,
            lag: self.lag,
        })
    }

    pub fn alphabet(&self) -> usize {
        self.in_modes.iter().product()
    }

    /// Loss level the run must get under: a tenth of the uniform-guess loss.
    pub fn target_loss(&self) -> f64 {
        0.1 * (self.alphabet() as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyLog {
    pub step: u64,
    /// Mean training loss since the previous log line.
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    pub seconds: f64,
}

/// Held-out batch drawn from a stream no training step uses.
pub fn copy_eval<T: Scalar>(state: &TrainState<T>, opts: &CopyOptions) -> Result<(f64, f64)> {
    let Network::Copy(net) = &state.network else {
        return Err(Error::arg("state holds an MNIST classifier, expected a copy-task network"));
    };
    let mut rng = stream(state.seed, u64::MAX);
    let batch = synth_copy_task::<T>(&mut rng, opts.seq_len, 256, opts.alphabet(), opts.lag)?;
    let (loss, _, acc) = net.loss_and_grads(&batch)?;
    Ok((loss.to_f64(), acc))
}

/// Trains from `state.step` up to `opts.steps`, logging every `log_every` steps.
pub fn train_copy<T: Scalar>(
    state: &mut TrainState<T>,
    opts: &CopyOptions,
    mut on_log: impl FnMut(&CopyLog),
) -> Result<Vec<CopyLog>> {
    if !matches!(state.network, Network::Copy(_)) {
        return Err(Error::arg("state holds an MNIST classifier, expected a copy-task network"));
    }
    let start = Instant::now();
    let mut logs = Vec::new();
    let mut window = (0.0, 0u64);
    let every = opts.log_every.max(1);
    while state.step < opts.steps {
        let batch = synth_copy_task::<T>(&mut state.rng, opts.seq_len, opts.batch_size, opts.alphabet(), opts.lag)?;
        let Network::Copy(net) = &state.network else { unreachable!("checked above") };
        let (loss, grads, _) = net.loss_and_grads(&batch)?;
        state.apply_gradients(&grads, opts.lr)?;
        window = (window.0 + loss.to_f64(), window.1 + 1);
        if state.step.is_multiple_of(every) || state.step == opts.steps {
            let (eval_loss, eval_accuracy) = copy_eval(state, opts)?;
            let log = CopyLog {
                step: state.step,
                train_loss: window.0 / window.1 as f64,
                eval_loss,
                eval_accuracy,
                seconds: start.elapsed().as_secs_f64(),
            };
            on_log(&log);
            logs.push(log);
            window = (0.0, 0);
        }
    }
    Ok(logs)
}

/// Synthetic stand-in for MNIST used by tests: class `c` lights up pixel
/// band `c` plus noise.
pub fn toy_digits<T: Scalar>(seed: u64, samples: usize) -> Result<Dataset<T>> {
    use rand::Rng;
    let mut rng = stream(seed, 7);
    let mut labels = Vec::with_capacity(samples);
    let mut data = Vec::with_capacity(samples * MNIST_PIXELS);
    for _ in 0..samples {
        let c = rng.random_range(0..MNIST_CLASSES);
        labels.push(c);
        for p in 0..MNIST_PIXELS {
            let on = p * MNIST_CLASSES / MNIST_PIXELS == c;
            let base = if on { 0.8 } else { 0.0 };
            data.push(T::from_f64(base + rng.random_range(0.0..0.2)));
        }
    }
    Dataset::new(
        DenseTensor::from_vec(vec![samples, MNIST_PIXELS], data)?,
        labels,
        MNIST_CLASSES,
        "toy digits",
    )
}
