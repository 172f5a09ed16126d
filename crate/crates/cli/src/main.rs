//! `btnn`: parameter calculators, correctness checks, micro-benchmarks and
//! small training runs for block-term layers.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or data error.

mod cmd;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use btnn::Precision;
use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Debug, Parser)]
#[command(name = "btnn", version, about = "Block-term tensor layer toolkit")]
struct Cli {
    /// Output format for results on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Worker threads for tensor kernels; 1 keeps runs bit-reproducible.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct LayerArgs {
    /// Input modes I_1,..,I_d.
    #[arg(long, value_delimiter = ',', required = true)]
    pub in_modes: Vec<usize>,
    /// Output modes J_1,..,J_d.
    #[arg(long, value_delimiter = ',', required = true)]
    pub out_modes: Vec<usize>,
    /// Number of Tucker blocks N.
    #[arg(long, default_value_t = 1)]
    pub cp_rank: usize,
    /// Core side length R.
    #[arg(long, default_value_t = 2)]
    pub tucker_rank: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dense, BT and optional TT parameter counts with compression ratios.
    Params {
        #[command(flatten)]
        layer: LayerArgs,
        /// TT ranks R_0,..,R_d (boundary ranks must be 1).
        #[arg(long, value_delimiter = ',')]
        tt_ranks: Option<Vec<usize>>,
    },
    /// Per-sample multiply-add, flop and memory estimates for FC, BT and TT.
    Cost {
        #[command(flatten)]
        layer: LayerArgs,
        #[arg(long, value_delimiter = ',')]
        tt_ranks: Option<Vec<usize>>,
    },
    /// BT parameter count over core orders and Tucker ranks.
    Curve {
        #[arg(long, default_value_t = 4096)]
        in_size: usize,
        #[arg(long, default_value_t = 256)]
        out_size: usize,
        #[arg(long, default_value_t = 1)]
        cp_rank: usize,
        #[arg(long, default_value_t = 8)]
        max_order: usize,
        #[arg(long, default_value_t = 4)]
        max_rank: usize,
    },
    /// Finite-difference check of every backward pass.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random cases per op.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        /// Only these ops (repeatable); default all.
        #[arg(long = "op")]
        ops: Vec<String>,
        /// Only 64-bit is meaningful for central differences at h = 1e-5.
        #[arg(long, default_value_t = Precision::F64)]
        precision: Precision,
        /// Test hook: perturb this op's analytic gradient.
        #[arg(long, hide = true)]
        corrupt_op: Option<String>,
    },
    /// Factored forward pass vs dense matvec with the reconstructed weights.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = Precision::F64)]
        precision: Precision,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        /// Fixed layer instead of random configurations.
        #[arg(long, value_delimiter = ',', requires = "out_modes")]
        in_modes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', requires = "in_modes")]
        out_modes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1)]
        cp_rank: usize,
        #[arg(long, default_value_t = 2)]
        tucker_rank: usize,
        /// Feed an all-zero input.
        #[arg(long)]
        zero_input: bool,
        /// Largest dense reconstruction allowed, in scalars.
        #[arg(long, default_value_t = btnn::bt::RECONSTRUCT_CAP)]
        cap: usize,
    },
    /// Wall time of dense vs BT forward passes.
    Bench {
        #[command(flatten)]
        layer: LayerArgs,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = Precision::F32)]
        precision: Precision,
    },
    /// Train one of the built-in networks.
    Train {
        #[command(subcommand)]
        task: TrainTask,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrainTask {
    /// BT classifier on MNIST.
    Mnist(MnistArgs),
    /// BT-LSTM on the synthetic lagged-copy task.
    LstmCopy(CopyArgs),
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// Directory holding the four IDX files; falls back to $BTNN_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub cp_rank: usize,
    #[arg(long, default_value_t = 2)]
    pub tucker_rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = Precision::F32)]
    pub precision: Precision,
    /// Use only the first n training images.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first n test images.
    #[arg(long)]
    pub test_limit: Option<usize>,
    /// Write the final state here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Continue from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CopyArgs {
    /// Total optimizer steps.
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 12)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 2)]
    pub lag: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Alphabet modes; the alphabet size is their product.
    #[arg(long, value_delimiter = ',', default_value = "4,4")]
    pub in_modes: Vec<usize>,
    /// Gate modes; their product must be 4 * hidden.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    pub gate_modes: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub cp_rank: usize,
    #[arg(long, default_value_t = 4)]
    pub tucker_rank: usize,
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = Precision::F32)]
    pub precision: Precision,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// How a command that ran to completion ended.
pub enum Outcome {
    Success,
    CheckFailed,
}

fn run(cli: Cli) -> Result<Outcome> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .context("configuring the worker pool")?;
    let f = cli.format;
    match cli.command {
        Command::Params { layer, tt_ranks } => cmd::params::params(f, &layer, tt_ranks.as_deref()),
        Command::Cost { layer, tt_ranks } => cmd::params::cost(f, &layer, tt_ranks.as_deref()),
        Command::Curve {
            in_size,
            out_size,
            cp_rank,
            max_order,
            max_rank,
        } => cmd::params::curve(f, in_size, out_size, cp_rank, max_order, max_rank),
        Command::Gradcheck {
            seed,
            seeds,
            ops,
            precision,
            corrupt_op,
        } => cmd::check::gradcheck(f, seed, seeds, ops, precision, corrupt_op),
        Command::Oracle {
            seed,
            trials,
            precision,
            batch,
            in_modes,
            out_modes,
            cp_rank,
            tucker_rank,
            zero_input,
            cap,
        } => {
            let fixed = in_modes.zip(out_modes).map(|(in_modes, out_modes)| LayerArgs {
                in_modes,
                out_modes,
                cp_rank,
                tucker_rank,
            });
            cmd::check::oracle(f, seed, trials, precision, batch, fixed, zero_input, cap)
        }
        Command::Bench {
            layer,
            batch,
            iters,
            warmup,
            seed,
            precision,
        } => cmd::bench::bench(f, &layer, batch, iters, warmup, seed, precision),
        Command::Train { task } => match task {
            TrainTask::Mnist(args) => cmd::train::mnist(f, &args),
            TrainTask::LstmCopy(args) => cmd::train::copy(f, &args),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
