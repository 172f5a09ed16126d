//! Central finite-difference checks of every hand-written backward pass.
//!
//! Each check projects an op's output onto random weights `w`, so the scalar
//! loss is `<w, op(inputs)>` and the analytic gradient is the op's backward
//! pass with upstream gradient `w`. Every scalar of every input is perturbed.

use std::fmt;

use rand::Rng;

use crate::bt::{BtConfig, BtLayer, BtParams};
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, Activation, BatchNorm, BnMode, BtLstm, DenseLayer, LstmState};
use crate::rng::{stream, uniform_tensor, Pcg32};
use crate::tensor::DenseTensor;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-8;

/// `|a - n| / max(|a|, |n|, ABS_TOL / REL_TOL)`: relative error that falls
/// back to an absolute comparison for tiny gradients.
pub fn scaled_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_TOL / REL_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub seed: u64,
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed {} {}[{}]: analytic {:.6e} numeric {:.6e}",
            self.seed, self.tensor, self.index, self.analytic, self.numeric
        )
    }
}

/// Worst error of one op over all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub op: String,
    pub seeds: usize,
    pub scalars: usize,
    pub worst: f64,
    pub worst_at: Option<Mismatch>,
    /// Every entry beyond tolerance, capped to keep reports short.
    pub failures: Vec<Mismatch>,
    pub failure_count: usize,
}

impl OpReport {
    fn new(op: &str) -> Self {
        Self {
            op: op.into(),
            seeds: 0,
            scalars: 0,
            worst: 0.0,
            worst_at: None,
            failures: Vec::new(),
            failure_count: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }
}

const MAX_LISTED: usize = 8;

type LossFn<'a> = Box<dyn Fn(&[DenseTensor<f64>]) -> Result<f64> + 'a>;

/// Inputs of one check with their analytic gradients and the scalar loss.
struct Case<'a> {
    names: Vec<String>,
    inputs: Vec<DenseTensor<f64>>,
    analytic: Vec<DenseTensor<f64>>,
    loss: LossFn<'a>,
}

impl Case<'_> {
    fn run(mut self, seed: u64, corrupt: bool, report: &mut OpReport) -> Result<()> {
        if self.names.len() != self.inputs.len() || self.analytic.len() != self.inputs.len() {
            return Err(Error::State(format!("{}: inputs and gradients disagree", report.op)));
        }
        for (a, x) in self.analytic.iter().zip(&self.inputs) {
            a.expect_same_shape(x, &report.op)?;
        }
        if corrupt {
            self.analytic[0].data_mut()[0] += 1e-2;
        }
        report.seeds += 1;
        for t in 0..self.inputs.len() {
            for i in 0..self.inputs[t].len() {
                let orig = self.inputs[t].data()[i];
                self.inputs[t].data_mut()[i] = orig + STEP;
                let up = (self.loss)(&self.inputs)?;
                self.inputs[t].data_mut()[i] = orig - STEP;
                let down = (self.loss)(&self.inputs)?;
                self.inputs[t].data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                let analytic = self.analytic[t].data()[i];
                let err = scaled_error(analytic, numeric);
                report.scalars += 1;
                let at = || Mismatch {
                    seed,
                    tensor: self.names[t].clone(),
                    index: i,
                    analytic,
                    numeric,
                };
                if err > report.worst || report.worst_at.is_none() {
                    report.worst = report.worst.max(err);
                    report.worst_at = Some(at());
                }
                if err > REL_TOL {
                    report.failure_count += 1;
                    if report.failures.len() < MAX_LISTED {
                        report.failures.push(at());
                    }
                }
            }
        }
        Ok(())
    }
}

fn project(y: &DenseTensor<f64>, w: &DenseTensor<f64>) -> Result<f64> {
    y.dot(w)
}

fn random_dims(rng: &mut Pcg32, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

/// Small random BT shape for gradient checks.
fn small_bt_config(rng: &mut Pcg32, bias: bool) -> Result<BtConfig> {
    let d = random_dims(rng, 1, 3);
    let in_modes: Vec<usize> = (0..d).map(|_| random_dims(rng, 1, 4)).collect();
    let out_modes: Vec<usize> = (0..d).map(|_| random_dims(rng, 1, 3)).collect();
    let bound = in_modes.iter().chain(&out_modes).copied().filter(|&m| m > 1).min().unwrap_or(1);
    let r = random_dims(rng, 1, bound.min(3));
    let n = random_dims(rng, 1, 3);
    BtConfig::new(in_modes, out_modes, n, r, bias)
}

/// Random BT layer with every parameter (bias included) nonzero.
fn random_bt(rng: &mut Pcg32, cfg: BtConfig) -> Result<BtLayer<f64>> {
    let mut layer = BtLayer::init(cfg, rng)?;
    for t in layer.params_mut().tensors_mut() {
        let dims = t.dims().to_vec();
        *t = uniform_tensor(rng, &dims, 0.8)?;
    }
    Ok(layer)
}

fn bt_from(cfg: &BtConfig, tensors: &[DenseTensor<f64>]) -> Result<BtLayer<f64>> {
    let (n, d) = (cfg.cp_rank(), cfg.order());
    let cores = tensors[..n].to_vec();
    let factors = (0..n).map(|b| tensors[n + b * d..n + (b + 1) * d].to_vec()).collect();
    let bias = cfg.use_bias().then(|| tensors[n + n * d].clone());
    BtLayer::from_params(cfg.clone(), BtParams { cores, factors, bias })
}

fn bt_names(layer: &BtLayer<f64>, prefix: &str) -> Vec<String> {
    layer.params().tensor_names().into_iter().map(|n| format!("{prefix}{n}")).collect()
}

fn owned(layer: &BtLayer<f64>) -> Vec<DenseTensor<f64>> {
    layer.params().tensors().into_iter().cloned().collect()
}

fn bt_case<'a>(rng: &mut Pcg32, zero_upstream: bool) -> Result<Case<'a>> {
    let bias = rng.random_bool(0.5);
    let cfg = small_bt_config(rng, bias)?;
    let layer = random_bt(rng, cfg.clone())?;
    let batch = random_dims(rng, 1, 3);
    let x = uniform_tensor(rng, &[batch, cfg.in_size()], 1.0)?;
    let w = if zero_upstream {
        DenseTensor::zeros(vec![batch, cfg.out_size()])?
    } else {
        uniform_tensor(rng, &[batch, cfg.out_size()], 1.0)?
    };
    let g = layer.backward(&x, &w)?;
    let mut analytic = vec![];
    let d_input = g.d_input.clone();
    analytic.extend(g.into_param_grads());
    analytic.push(d_input);
    let mut names = bt_names(&layer, "");
    names.push("x".into());
    let mut inputs = owned(&layer);
    inputs.push(x);
    let np = inputs.len() - 1;
    Ok(Case {
        names,
        inputs,
        analytic,
        loss: Box::new(move |t| project(&bt_from(&cfg, &t[..np])?.forward(&t[np])?, &w)),
    })
}

fn dense_case<'a>(rng: &mut Pcg32) -> Result<Case<'a>> {
    let (b, i, j) = (random_dims(rng, 1, 4), random_dims(rng, 1, 5), random_dims(rng, 1, 5));
    let layer = DenseLayer::new(uniform_tensor(rng, &[j, i], 1.0)?, uniform_tensor(rng, &[j], 1.0)?)?;
    let x = uniform_tensor(rng, &[b, i], 1.0)?;
    let w = uniform_tensor(rng, &[b, j], 1.0)?;
    let g = layer.backward(&x, &w)?;
    Ok(Case {
        names: vec!["weight".into(), "bias".into(), "x".into()],
        inputs: vec![layer.weight, layer.bias, x],
        analytic: vec![g.d_weight, g.d_bias, g.d_input],
        loss: Box::new(move |t| project(&DenseLayer::new(t[0].clone(), t[1].clone())?.forward(&t[2])?, &w)),
    })
}

fn batchnorm_case<'a>(rng: &mut Pcg32, mode: BnMode) -> Result<Case<'a>> {
    let (b, f) = (random_dims(rng, 2, 5), random_dims(rng, 1, 4));
    let mut bn = BatchNorm::<f64>::new(f)?;
    bn.gamma = uniform_tensor(rng, &[f], 1.5)?;
    bn.beta = uniform_tensor(rng, &[f], 1.0)?;
    bn.running_mean = uniform_tensor(rng, &[f], 0.5)?;
    bn.running_var = uniform_tensor::<f64>(rng, &[f], 0.5)?.map(|v| v + 1.0);
    // spread rows so the batch variance is well away from epsilon
    let x = uniform_tensor(rng, &[b, f], 2.0)?;
    let w = uniform_tensor(rng, &[b, f], 1.0)?;
    let (_, cache) = bn.forward(&x, mode)?;
    let (dx, dg, db) = bn.backward(&cache, &w)?;
    let template = bn.clone();
    Ok(Case {
        names: vec!["gamma".into(), "beta".into(), "x".into()],
        inputs: vec![bn.gamma, bn.beta, x],
        analytic: vec![dg, db, dx],
        loss: Box::new(move |t| {
            let mut layer = template.clone();
            layer.gamma = t[0].clone();
            layer.beta = t[1].clone();
            project(&layer.forward(&t[2], mode)?.0, &w)
        }),
    })
}

fn activation_case<'a>(rng: &mut Pcg32, act: Activation) -> Result<Case<'a>> {
    let (b, f) = (random_dims(rng, 1, 4), random_dims(rng, 1, 6));
    let mut x = uniform_tensor::<f64>(rng, &[b, f], 3.0)?;
    if act == Activation::Relu {
        // keep samples off the kink, where the derivative is a convention
        x = x.map(|v| if v >= 0.0 { v + 0.05 } else { v - 0.05 });
    }
    let w = uniform_tensor(rng, &[b, f], 1.0)?;
    let dx = act.backward(&x, &w)?;
    Ok(Case {
        names: vec!["x".into()],
        inputs: vec![x],
        analytic: vec![dx],
        loss: Box::new(move |t| project(&act.forward(&t[0]), &w)),
    })
}

fn softmax_case<'a>(rng: &mut Pcg32) -> Result<Case<'a>> {
    let (b, c) = (random_dims(rng, 1, 4), random_dims(rng, 2, 6));
    let logits = uniform_tensor::<f64>(rng, &[b, c], 4.0)?;
    let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
    let (_, d) = softmax_cross_entropy(&logits, &labels)?;
    Ok(Case {
        names: vec!["logits".into()],
        inputs: vec![logits],
        analytic: vec![d],
        loss: Box::new(move |t| Ok(softmax_cross_entropy(&t[0], &labels)?.0)),
    })
}

/// Small BT-LSTM: the input map's output modes multiply to `4H`.
fn random_lstm(rng: &mut Pcg32) -> Result<BtLstm<f64>> {
    let hidden = random_dims(rng, 1, 3);
    let d = random_dims(rng, 1, 2);
    let out_modes = if d == 1 { vec![4 * hidden] } else { vec![4, hidden] };
    let in_modes: Vec<usize> = (0..d).map(|_| random_dims(rng, 1, 3)).collect();
    let bound = in_modes.iter().chain(&out_modes).copied().filter(|&m| m > 1).min().unwrap_or(1);
    let r = random_dims(rng, 1, bound.min(2));
    let cfg = BtConfig::new(in_modes, out_modes, random_dims(rng, 1, 2), r, false)?;
    let input_map = random_bt(rng, cfg)?;
    let recurrent = DenseLayer::new(
        uniform_tensor(rng, &[4 * hidden, hidden], 1.0)?,
        uniform_tensor(rng, &[4 * hidden], 1.0)?,
    )?;
    BtLstm::new(input_map, recurrent)
}

fn lstm_from(cfg: &BtConfig, t: &[DenseTensor<f64>]) -> Result<BtLstm<f64>> {
    let np = t.len() - 2;
    BtLstm::new(bt_from(cfg, &t[..np])?, DenseLayer::new(t[np].clone(), t[np + 1].clone())?)
}

fn lstm_names(lstm: &BtLstm<f64>) -> Vec<String> {
    let mut names = bt_names(&lstm.input_map, "input_map.");
    names.extend(["recurrent.weight".into(), "recurrent.bias".into()]);
    names
}

fn lstm_params(lstm: &BtLstm<f64>) -> Vec<DenseTensor<f64>> {
    let mut v = owned(&lstm.input_map);
    v.extend([lstm.recurrent.weight.clone(), lstm.recurrent.bias.clone()]);
    v
}

fn lstm_step_case<'a>(rng: &mut Pcg32) -> Result<Case<'a>> {
    let lstm = random_lstm(rng)?;
    let (b, h, i) = (random_dims(rng, 1, 3), lstm.hidden(), lstm.input_size());
    let x = uniform_tensor(rng, &[b, i], 1.0)?;
    let h0 = uniform_tensor(rng, &[b, h], 1.0)?;
    let c0 = uniform_tensor(rng, &[b, h], 1.0)?;
    let wh = uniform_tensor(rng, &[b, h], 1.0)?;
    let wc = uniform_tensor(rng, &[b, h], 1.0)?;
    let state = LstmState { h: h0.clone(), c: c0.clone() };
    let (_, cache) = lstm.step(&x, &state)?;
    let (dx, dh, dc, grads) = lstm.step_backward(&cache, &wh, &wc)?;
    let mut names = lstm_names(&lstm);
    names.extend(["x".into(), "h_prev".into(), "c_prev".into()]);
    let mut inputs = lstm_params(&lstm);
    let np = inputs.len();
    inputs.extend([x, h0, c0]);
    let mut analytic = grads;
    analytic.extend([dx, dh, dc]);
    let cfg = lstm.input_map.config().clone();
    Ok(Case {
        names,
        inputs,
        analytic,
        loss: Box::new(move |t| {
            let net = lstm_from(&cfg, &t[..np])?;
            let state = LstmState {
                h: t[np + 1].clone(),
                c: t[np + 2].clone(),
            };
            let (next, _) = net.step(&t[np], &state)?;
            Ok(project(&next.h, &wh)? + project(&next.c, &wc)?)
        }),
    })
}

fn bptt_case<'a>(rng: &mut Pcg32) -> Result<Case<'a>> {
    let lstm = random_lstm(rng)?;
    let steps = random_dims(rng, 1, 4);
    let (b, h, i) = (random_dims(rng, 1, 2), lstm.hidden(), lstm.input_size());
    let x = uniform_tensor(rng, &[steps, b, i], 1.0)?;
    let h0 = uniform_tensor(rng, &[b, h], 0.5)?;
    let c0 = uniform_tensor(rng, &[b, h], 0.5)?;
    let ws: Vec<DenseTensor<f64>> = (0..steps)
        .map(|_| uniform_tensor(rng, &[b, h], 1.0))
        .collect::<Result<_>>()?;
    let (_, caches) = lstm.forward_sequence(&x, &LstmState { h: h0.clone(), c: c0.clone() })?;
    let g = lstm.bptt(&caches, &ws)?;
    let mut names = lstm_names(&lstm);
    names.extend(["x_seq".into(), "h0".into(), "c0".into()]);
    let mut inputs = lstm_params(&lstm);
    let np = inputs.len();
    inputs.extend([x, h0, c0]);
    let mut analytic = g.params;
    analytic.extend([g.d_inputs, g.d_h0, g.d_c0]);
    let cfg = lstm.input_map.config().clone();
    Ok(Case {
        names,
        inputs,
        analytic,
        loss: Box::new(move |t| {
            let net = lstm_from(&cfg, &t[..np])?;
            let init = LstmState {
                h: t[np + 1].clone(),
                c: t[np + 2].clone(),
            };
            let (states, _) = net.forward_sequence(&t[np], &init)?;
            states.iter().zip(&ws).map(|(s, w)| project(&s.h, w)).sum()
        }),
    })
}

/// BT layer -> tanh -> dense -> softmax cross-entropy, chained by hand from
/// the per-layer backward passes.
fn composition_case<'a>(rng: &mut Pcg32) -> Result<Case<'a>> {
    let cfg = small_bt_config(rng, true)?;
    let bt = random_bt(rng, cfg.clone())?;
    let classes = random_dims(rng, 2, 4);
    let head = DenseLayer::new(
        uniform_tensor(rng, &[classes, cfg.out_size()], 1.0)?,
        uniform_tensor(rng, &[classes], 0.5)?,
    )?;
    let b = random_dims(rng, 1, 3);
    let x = uniform_tensor(rng, &[b, cfg.in_size()], 1.0)?;
    let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..classes)).collect();

    let pre = bt.forward(&x)?;
    let hid = Activation::Tanh.forward(&pre);
    let (_, d_logits) = softmax_cross_entropy(&head.forward(&hid)?, &labels)?;
    let hg = head.backward(&hid, &d_logits)?;
    let d_pre = Activation::Tanh.backward(&pre, &hg.d_input)?;
    let bg = bt.backward(&x, &d_pre)?;

    let mut names = bt_names(&bt, "bt.");
    names.extend(["head.weight".into(), "head.bias".into()]);
    let mut inputs = owned(&bt);
    let np = inputs.len();
    inputs.extend([head.weight, head.bias]);
    let mut analytic = bg.into_param_grads();
    analytic.extend([hg.d_weight, hg.d_bias]);
    Ok(Case {
        names,
        inputs,
        analytic,
        loss: Box::new(move |t| {
            let bt = bt_from(&cfg, &t[..np])?;
            let head = DenseLayer::new(t[np].clone(), t[np + 1].clone())?;
            let logits = head.forward(&Activation::Tanh.forward(&bt.forward(&x)?))?;
            Ok(softmax_cross_entropy(&logits, &labels)?.0)
        }),
    })
}

/// Every op covered by the suite, in reporting order.
pub const OPS: &[&str] = &[
    "bt_layer",
    "bt_layer_zero_upstream",
    "dense",
    "batchnorm_train",
    "batchnorm_eval",
    "relu",
    "sigmoid",
    "tanh",
    "softmax_cross_entropy",
    "lstm_step",
    "lstm_bptt",
    "composition",
];

fn build_case<'a>(op: &str, rng: &mut Pcg32) -> Result<Case<'a>> {
    match op {
        "bt_layer" => bt_case(rng, false),
        "bt_layer_zero_upstream" => bt_case(rng, true),
        "dense" => dense_case(rng),
        "batchnorm_train" => batchnorm_case(rng, BnMode::Train),
        "batchnorm_eval" => batchnorm_case(rng, BnMode::Eval),
        "relu" => activation_case(rng, Activation::Relu),
        "sigmoid" => activation_case(rng, Activation::Sigmoid),
        "tanh" => activation_case(rng, Activation::Tanh),
        "softmax_cross_entropy" => softmax_case(rng),
        "lstm_step" => lstm_step_case(rng),
        "lstm_bptt" => bptt_case(rng),
        "composition" => composition_case(rng),
        other => Err(Error::arg(format!("unknown gradient-check op '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub seeds_per_op: usize,
    /// Restrict to these ops; empty means all.
    pub ops: Vec<String>,
    /// Test hook: perturb the analytic gradient of this op.
    pub corrupt: Option<String>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds_per_op: 100,
            ops: Vec::new(),
            corrupt: None,
        }
    }
}

/// Checks one op over `seeds` consecutive seeds starting at `first_seed`.
pub fn check_op(op: &str, first_seed: u64, seeds: usize, corrupt: bool) -> Result<OpReport> {
    let mut report = OpReport::new(op);
    let op_index = OPS
        .iter()
        .position(|&o| o == op)
        .ok_or_else(|| Error::arg(format!("unknown gradient-check op '{op}'")))?;
    for s in 0..seeds as u64 {
        let seed = first_seed.wrapping_add(s);
        let mut rng = stream(seed, op_index as u64);
        build_case(op, &mut rng)?.run(seed, corrupt, &mut report)?;
    }
    Ok(report)
}

pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<OpReport>> {
    for op in opts.ops.iter().chain(opts.corrupt.iter()) {
        if !OPS.contains(&op.as_str()) {
            return Err(Error::arg(format!("unknown gradient-check op '{op}'")));
        }
    }
    OPS.iter()
        .filter(|op| opts.ops.is_empty() || opts.ops.iter().any(|o| o == *op))
        .map(|op| check_op(op, opts.seed, opts.seeds_per_op, opts.corrupt.as_deref() == Some(op)))
        .collect()
}
