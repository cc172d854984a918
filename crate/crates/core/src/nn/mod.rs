//! Policy network: three state embeddings multiplied together, a state
//! combiner, a command embedding, and a head squashed into `[0, 1]^3`.
//!
//! Parameters live in one flat vector so the optimizer, checkpoints and the
//! finite-difference checker can treat them uniformly.

mod adam;
mod checkpoint;
mod gradcheck;

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub use adam::Adam;
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use gradcheck::{finite_difference_check, gradient_check, gradient_check_against, GradCheckReport};

/// Width shared by every embedding.
pub const EMBEDDING: usize = 64;
/// Observation channels per age group.
pub const CHANNELS: usize = 13;
/// Previous action, holiday flag.
const ACTION_DIM: usize = 3;
/// Desired return (2) and desired horizon.
pub const COMMAND_DIM: usize = 3;
/// Conv kernel size; two valid convolutions take 13 channels to 5 positions.
const KERNEL: usize = 5;
const CONV_FILTERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    #[default]
    DenseBig,
    /// Compartment embedding built from two 1-D convolutions. Age groups are
    /// the input channels and the 13 per-group values the sequence axis;
    /// kernel 5 without padding gives lengths 13 -> 9 -> 5, so 20 filters
    /// flatten to 100 features.
    Conv1dBig,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::DenseBig => "dense-big",
            Arch::Conv1dBig => "conv1d-big",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-big" => Ok(Arch::DenseBig),
            "conv1d-big" => Ok(Arch::Conv1dBig),
            other => Err(Error::Config(format!("unknown architecture {other:?} (dense-big, conv1d-big)"))),
        }
    }
}

/// The six sub-networks, in parameter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Compartments,
    PrevAction,
    Holiday,
    State,
    Command,
    Head,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Compartments,
        Stage::PrevAction,
        Stage::Holiday,
        Stage::State,
        Stage::Command,
        Stage::Head,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Compartments => "sc_emb",
            Stage::PrevAction => "sm_emb",
            Stage::Holiday => "sh_emb",
            Stage::State => "s_emb",
            Stage::Command => "c_emb",
            Stage::Head => "fc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Relu,
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Linear { inp: usize, out: usize },
    Conv1d { in_ch: usize, out_ch: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    kind: Kind,
    act: Act,
    /// Offsets of the weight block and bias block in the flat vector.
    w: usize,
    b: usize,
}

impl Layer {
    /// Weight block shape as stored: `(fan_in, fan_out)`.
    fn w_shape(&self) -> (usize, usize) {
        match self.kind {
            Kind::Linear { inp, out } => (inp, out),
            Kind::Conv1d { in_ch, out_ch, .. } => (in_ch * KERNEL, out_ch),
        }
    }

    fn b_len(&self) -> usize {
        self.w_shape().1
    }

}

#[derive(Debug, Clone, PartialEq)]
struct Topology {
    stages: [Vec<Layer>; 6],
    n_params: usize,
}

impl Topology {
    fn new(arch: Arch, groups: usize) -> Self {
        use Act::*;
        let mut offset = 0;
        let mut stage = |spec: &[(Kind, Act)]| -> Vec<Layer> {
            spec.iter()
                .map(|&(kind, act)| {
                    let mut l = Layer { kind, act, w: offset, b: 0 };
                    let (fi, fo) = l.w_shape();
                    l.b = offset + fi * fo;
                    offset = l.b + fo;
                    l
                })
                .collect()
        };
        let lin = |inp, out| Kind::Linear { inp, out };
        let e = EMBEDDING;
        let compartments = match arch {
            Arch::DenseBig => stage(&[(lin(CHANNELS * groups, e), Relu), (lin(e, e), Sigmoid)]),
            Arch::Conv1dBig => {
                let l1 = CHANNELS - KERNEL + 1;
                let l2 = l1 - KERNEL + 1;
                stage(&[
                    (Kind::Conv1d { in_ch: groups, out_ch: CONV_FILTERS, len: CHANNELS }, Relu),
                    (Kind::Conv1d { in_ch: CONV_FILTERS, out_ch: CONV_FILTERS, len: l1 }, Relu),
                    (lin(CONV_FILTERS * l2, e), Sigmoid),
                ])
            }
        };
        let prev = stage(&[(lin(ACTION_DIM, e), Relu), (lin(e, e), Sigmoid)]);
        let holiday = stage(&[(lin(1, e), Relu), (lin(e, e), Sigmoid)]);
        let state = stage(&[(lin(e, e), Relu)]);
        let command = stage(&[(lin(COMMAND_DIM, e), Sigmoid)]);
        let head = stage(&[(lin(e, e), Relu), (lin(e, ACTION_DIM), Identity)]);
        Topology { stages: [compartments, prev, holiday, state, command, head], n_params: offset }
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.stages.iter().flatten()
    }
}

/// Network parameters plus the metadata needed to rebuild the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Arch,
    groups: usize,
    seed: u64,
    topology: Topology,
    params: Vec<f64>,
}

/// Fresh network for the 10-group observation layout.
pub fn init_network(arch: Arch, seed: u64) -> Network {
    Network::new(arch, 10, seed)
}

impl Network {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(arch: Arch, groups: usize, seed: u64) -> Self {
        let topology = Topology::new(arch, groups);
        let mut params = vec![0.0; topology.n_params];
        let mut rng = SeedStream::new(seed).rng("nn-init", 0);
        for l in topology.layers() {
            let (fi, fo) = l.w_shape();
            let bound = 1.0 / (fi as f64).sqrt();
            for w in &mut params[l.w..l.w + fi * fo] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Self { arch, groups, seed, topology, params }
    }

    fn from_parts(arch: Arch, groups: usize, seed: u64, params: Vec<f64>) -> Result<Self> {
        let topology = Topology::new(arch, groups);
        if params.len() != topology.n_params {
            return Err(Error::Checkpoint(format!(
                "{} parameters for {arch} with {groups} groups, expected {}",
                params.len(),
                topology.n_params
            )));
        }
        Ok(Self { arch, groups, seed, topology, params })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn observation_len(&self) -> usize {
        CHANNELS * self.groups + ACTION_DIM + 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Shapes of the weight blocks of one stage, `(fan_in, fan_out)`; conv
    /// blocks are `(in_channels * kernel, out_channels)`.
    pub fn weight_shapes(&self, stage: Stage) -> Vec<(usize, usize)> {
        self.topology.stages[stage as usize].iter().map(Layer::w_shape).collect()
    }

    /// `(offset, len)` of every weight and bias block, in parameter order.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        self.topology
            .layers()
            .flat_map(|l| {
                let (fi, fo) = l.w_shape();
                [(l.w, fi * fo), (l.b, fo)]
            })
            .collect()
    }

    /// `(offset, len)` of the parameters belonging to `stage`.
    pub fn stage_range(&self, stage: Stage) -> (usize, usize) {
        let layers = &self.topology.stages[stage as usize];
        let first = layers[0].w;
        let last = layers[layers.len() - 1];
        (first, last.b + last.b_len() - first)
    }

    /// Actions for a batch of observations and commands
    /// (`desired_return_0, desired_return_1, desired_horizon` per row).
    pub fn predict(&self, obs: ArrayView2<f64>, command: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_inputs(obs, command)?;
        Ok(self.forward(obs, command).output)
    }

    /// One action in `[0, 1]^3`.
    pub fn policy_forward(&self, obs: &[f64], desired_return: [f64; 2], desired_horizon: f64) -> Result<[f64; 3]> {
        let obs = ArrayView2::from_shape((1, obs.len()), obs).expect("row view");
        let cmd = [desired_return[0], desired_return[1], desired_horizon];
        let cmd = ArrayView2::from_shape((1, COMMAND_DIM), &cmd).expect("row view");
        let out = self.predict(obs, cmd)?;
        Ok([out[[0, 0]], out[[0, 1]], out[[0, 2]]])
    }

    fn check_inputs(&self, obs: ArrayView2<f64>, command: ArrayView2<f64>) -> Result<()> {
        if obs.ncols() != self.observation_len() || command.ncols() != COMMAND_DIM || obs.nrows() != command.nrows() {
            return Err(Error::Dimension(format!(
                "observation {:?} / command {:?}, expected (_, {}) / (_, {COMMAND_DIM})",
                obs.dim(),
                command.dim(),
                self.observation_len()
            )));
        }
        if !obs.iter().chain(command.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        Ok(())
    }

    /// Mean squared error over rows and action components.
    pub fn loss(&self, batch: &TrainingBatch) -> f64 {
        let out = self.forward(batch.obs.view(), batch.command.view()).output;
        mse(&out, &batch.target)
    }

    /// Loss and gradient with respect to the flat parameter vector.
    pub fn loss_and_grad(&self, batch: &TrainingBatch) -> (f64, Vec<f64>) {
        let fwd = self.forward(batch.obs.view(), batch.command.view());
        let loss = mse(&fwd.output, &batch.target);
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&fwd, batch, &mut grad);
        (loss, grad)
    }

    /// One optimizer step on `batch`; returns the loss before the update.
    pub fn train_batch(&mut self, opt: &mut Adam, batch: &TrainingBatch) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        if batch.obs.ncols() != self.observation_len() {
            return Err(Error::Dimension(format!(
                "batch observations have {} columns, network expects {}",
                batch.obs.ncols(),
                self.observation_len()
            )));
        }
        let (loss, grad) = self.loss_and_grad(batch);
        opt.step(&mut self.params, &grad)?;
        Ok(loss)
    }

    fn w_view(&self, l: &Layer) -> ArrayView2<'_, f64> {
        let (fi, fo) = l.w_shape();
        ArrayView2::from_shape((fi, fo), &self.params[l.w..l.w + fi * fo]).expect("weight block")
    }

    fn b_view(&self, l: &Layer) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[l.b..l.b + l.b_len()])
    }

    fn layer_forward(&self, l: &Layer, input: Array2<f64>) -> LayerCache {
        let w = self.w_view(l);
        let b = self.b_view(l);
        let (mut output, cols) = match l.kind {
            Kind::Linear { .. } => (input.dot(&w) + b, None),
            Kind::Conv1d { in_ch, out_ch, len } => {
                let cols = im2col(&input, in_ch, len);
                let y = cols.dot(&w) + b;
                (positions_to_rows(&y, input.nrows(), out_ch, len - KERNEL + 1), Some(cols))
            }
        };
        match l.act {
            Act::Relu => output.mapv_inplace(|v| v.max(0.0)),
            Act::Sigmoid => output.mapv_inplace(sigmoid),
            Act::Identity => {}
        }
        LayerCache { input, cols, output }
    }

    fn stage_forward(&self, stage: Stage, input: Array2<f64>) -> Vec<LayerCache> {
        let mut caches: Vec<LayerCache> = Vec::with_capacity(3);
        let mut x = input;
        for l in &self.topology.stages[stage as usize] {
            let c = self.layer_forward(l, x);
            x = c.output.clone();
            caches.push(c);
        }
        caches
    }

    fn forward(&self, obs: ArrayView2<f64>, command: ArrayView2<f64>) -> Forward {
        let nc = CHANNELS * self.groups;
        let sc = self.stage_forward(Stage::Compartments, obs.slice(s![.., ..nc]).to_owned());
        let sm = self.stage_forward(Stage::PrevAction, obs.slice(s![.., nc..nc + ACTION_DIM]).to_owned());
        let sh = self.stage_forward(Stage::Holiday, obs.slice(s![.., nc + ACTION_DIM..]).to_owned());
        let state_in = last(&sc) * last(&sm) * last(&sh);
        let st = self.stage_forward(Stage::State, state_in);
        let cm = self.stage_forward(Stage::Command, command.to_owned());
        let head_in = last(&st) * last(&cm);
        let fc = self.stage_forward(Stage::Head, head_in);
        let output = last(&fc).mapv(|v| 0.5 * (v.tanh() + 1.0));
        Forward { stages: [sc, sm, sh, st, cm, fc], output }
    }

    /// Backpropagates through one stage, accumulating into `grad`; returns
    /// the gradient with respect to the stage input when asked.
    fn stage_backward(
        &self,
        stage: Stage,
        caches: &[LayerCache],
        dout: Array2<f64>,
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let layers = &self.topology.stages[stage as usize];
        let mut d = dout;
        for (i, (l, c)) in layers.iter().zip(caches).enumerate().rev() {
            match l.act {
                Act::Relu => Zip::from(&mut d).and(&c.output).for_each(|g, &y| {
                    if y <= 0.0 {
                        *g = 0.0
                    }
                }),
                Act::Sigmoid => Zip::from(&mut d).and(&c.output).for_each(|g, &y| *g *= y * (1.0 - y)),
                Act::Identity => {}
            }
            let need_input = i > 0 || want_input;
            let (fi, fo) = l.w_shape();
            let w = self.w_view(l);
            let (dw, db, din) = match l.kind {
                Kind::Linear { .. } => {
                    let din = need_input.then(|| d.dot(&w.t()));
                    (c.input.t().dot(&d), d.sum_axis(Axis(0)), din)
                }
                Kind::Conv1d { in_ch, out_ch, len } => {
                    let lo = len - KERNEL + 1;
                    let dy = rows_to_positions(&d, out_ch, lo);
                    let cols = c.cols.as_ref().expect("conv cache");
                    let din = need_input.then(|| col2im(&dy.dot(&w.t()), d.nrows(), in_ch, len));
                    (cols.t().dot(&dy), dy.sum_axis(Axis(0)), din)
                }
            };
            for (g, v) in grad[l.w..l.w + fi * fo].iter_mut().zip(dw.iter()) {
                *g += v;
            }
            for (g, v) in grad[l.b..l.b + fo].iter_mut().zip(db.iter()) {
                *g += v;
            }
            d = din?;
        }
        Some(d)
    }

    fn backward(&self, fwd: &Forward, batch: &TrainingBatch, grad: &mut [f64]) {
        let [sc, sm, sh, st, cm, fc] = &fwd.stages;
        let n = (batch.len() * ACTION_DIM) as f64;
        // d/dy of mean (0.5(tanh y + 1) - t)^2
        let mut dy = Array2::zeros(fwd.output.raw_dim());
        Zip::from(&mut dy).and(&fwd.output).and(&batch.target).for_each(|g, &o, &t| {
            // o = (tanh+1)/2  =>  do/dy = 2 o (1 - o)
            *g = 2.0 * (o - t) / n * 2.0 * o * (1.0 - o);
        });
        let dz = self.stage_backward(Stage::Head, fc, dy, grad, true).expect("head input");
        let ds = &dz * last(cm);
        let dc = &dz * last(st);
        self.stage_backward(Stage::Command, cm, dc, grad, false);
        let de = self.stage_backward(Stage::State, st, ds, grad, true).expect("state input");
        let (a, b, h) = (last(sc), last(sm), last(sh));
        self.stage_backward(Stage::Compartments, sc, &de * &b * &h, grad, false);
        self.stage_backward(Stage::PrevAction, sm, &de * &a * &h, grad, false);
        self.stage_backward(Stage::Holiday, sh, &de * &a * &b, grad, false);
    }

    /// Sign pattern of every ReLU in the forward pass; a change between two
    /// nearby parameter vectors means a kink was crossed.
    fn relu_pattern(&self, batch: &TrainingBatch) -> Vec<bool> {
        let fwd = self.forward(batch.obs.view(), batch.command.view());
        let mut pattern = Vec::new();
        for (layers, caches) in self.topology.stages.iter().zip(&fwd.stages) {
            for (l, c) in layers.iter().zip(caches) {
                if l.act == Act::Relu {
                    pattern.extend(c.output.iter().map(|&v| v > 0.0));
                }
            }
        }
        pattern
    }
}

struct LayerCache {
    input: Array2<f64>,
    cols: Option<Array2<f64>>,
    output: Array2<f64>,
}

struct Forward {
    stages: [Vec<LayerCache>; 6],
    output: Array2<f64>,
}

fn last(caches: &[LayerCache]) -> Array2<f64> {
    caches[caches.len() - 1].output.clone()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn mse(out: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let n = out.len() as f64;
    Zip::from(out).and(target).fold(0.0, |acc, &o, &t| acc + (o - t) * (o - t)) / n
}

/// Rows `[c * len + l]` to patches: row `r * lo + p`, column `c * KERNEL + j`.
fn im2col(x: &Array2<f64>, in_ch: usize, len: usize) -> Array2<f64> {
    let lo = len - KERNEL + 1;
    let mut cols = Array2::zeros((x.nrows() * lo, in_ch * KERNEL));
    for (r, row) in x.outer_iter().enumerate() {
        for p in 0..lo {
            let mut dst = cols.row_mut(r * lo + p);
            for c in 0..in_ch {
                for j in 0..KERNEL {
                    dst[c * KERNEL + j] = row[c * len + p + j];
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &Array2<f64>, batch: usize, in_ch: usize, len: usize) -> Array2<f64> {
    let lo = len - KERNEL + 1;
    let mut dx = Array2::zeros((batch, in_ch * len));
    for r in 0..batch {
        let mut row = dx.row_mut(r);
        for p in 0..lo {
            let src = dcols.row(r * lo + p);
            for c in 0..in_ch {
                for j in 0..KERNEL {
                    row[c * len + p + j] += src[c * KERNEL + j];
                }
            }
        }
    }
    dx
}

/// `(batch * lo, ch)` to `(batch, ch * lo)` with channel-major columns.
fn positions_to_rows(y: &Array2<f64>, batch: usize, ch: usize, lo: usize) -> Array2<f64> {
    Array2::from_shape_fn((batch, ch * lo), |(r, i)| y[[r * lo + i % lo, i / lo]])
}

fn rows_to_positions(d: &Array2<f64>, ch: usize, lo: usize) -> Array2<f64> {
    Array2::from_shape_fn((d.nrows() * lo, ch), |(i, o)| d[[i / lo, o * lo + i % lo]])
}

/// Rows of `(observation, desired return, desired horizon, target action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    obs: Array2<f64>,
    command: Array2<f64>,
    target: Array2<f64>,
}

impl TrainingBatch {
    pub fn new(obs: Array2<f64>, desired_return: Array2<f64>, desired_horizon: Array1<f64>, target: Array2<f64>) -> Result<Self> {
        let n = obs.nrows();
        if desired_return.dim() != (n, 2) || desired_horizon.len() != n || target.dim() != (n, ACTION_DIM) {
            return Err(Error::Dimension(format!(
                "batch parts disagree: obs {:?}, return {:?}, horizon {}, target {:?}",
                obs.dim(),
                desired_return.dim(),
                desired_horizon.len(),
                target.dim()
            )));
        }
        if target.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("target actions must lie in [0, 1]".into()));
        }
        if desired_horizon.iter().any(|&h| h.is_nan() || h < 1.0) {
            return Err(Error::InvalidInput("desired horizon must be at least 1".into()));
        }
        let mut command = Array2::zeros((n, COMMAND_DIM));
        command.slice_mut(s![.., ..2]).assign(&desired_return);
        command.column_mut(2).assign(&desired_horizon);
        Ok(Self { obs, command, target })
    }

    /// Builds a batch from per-row slices.
    pub fn from_rows<'a, I>(obs_len: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], [f64; 2], f64, [f64; 3])>,
    {
        let (mut o, mut r, mut h, mut t) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (obs, ret, hor, tgt) in rows {
            if obs.len() != obs_len {
                return Err(Error::Dimension(format!("observation of length {}, expected {obs_len}", obs.len())));
            }
            o.extend_from_slice(obs);
            r.extend(ret);
            h.push(hor);
            t.extend(tgt);
        }
        let n = h.len();
        let shape = |v: Vec<f64>, c: usize| Array2::from_shape_vec((n, c), v).expect("row-major batch");
        Self::new(shape(o, obs_len), shape(r, 2), Array1::from(h), shape(t, ACTION_DIM))
    }

    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs(&self) -> ArrayView2<'_, f64> {
        self.obs.view()
    }

    /// Columns: desired return (2), desired horizon.
    pub fn command(&self) -> ArrayView2<'_, f64> {
        self.command.view()
    }

    pub fn target(&self) -> ArrayView2<'_, f64> {
        self.target.view()
    }
}

/// `-log softmax(logits)[target]`.
pub fn cross_entropy_loss(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::InvalidInput(format!("target {target} out of range for {} logits", logits.len())));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite logit".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok((lse - logits[target]).max(0.0))
}
