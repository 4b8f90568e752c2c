//! State+action value network trained by full-batch gradient descent.
//!
//! The network maps `(con, fea, div, action)`, all min-max normalized, to a
//! single Q-value through two ReLU hidden layers of 40 units. A training
//! session normalizes the sampled records, freezes the targets
//! `q = r + gamma * max_a Q(s', a)` with the pre-session weights, and then
//! minimizes the mean squared error with an inverse-time decayed step size.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::operators::OperatorId;
use crate::state::{PopulationState, Record};

/// Input, hidden and output widths.
pub const LAYER_SIZES: [usize; 4] = [4, 40, 40, 1];
/// Initial bias of every hidden unit.
pub const HIDDEN_BIAS: f64 = 0.1;
/// Initial bias of the output unit.
pub const OUTPUT_BIAS: f64 = 0.0;
/// Number of record columns: `(con, fea, div, op, r, con', fea', div')`.
pub const RECORD_COLUMNS: usize = 8;
/// Default finite-difference step for [`gradient_check`].
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

/// Fully connected layer with row-major `outputs x inputs` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Self {
        assert_eq!(weights.len(), inputs * outputs, "weight shape mismatch");
        assert_eq!(biases.len(), outputs, "bias shape mismatch");
        Self {
            inputs,
            outputs,
            weights,
            biases,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inputs, self.outputs)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.biases))
        {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

/// Multilayer perceptron with ReLU hidden layers and a linear output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Loss gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl QNetwork {
    /// Random initialization: weights uniform in `[-0.5, 0.5] / sqrt(fan_in)`,
    /// hidden biases 0.1, output bias 0.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::init_with_sizes(&LAYER_SIZES, rng)
    }

    pub fn init_with_sizes<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output layer");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let scale = 1.0 / (inputs as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| rng.gen_range(-0.5..=0.5) * scale)
                    .collect();
                let bias = if i == last { OUTPUT_BIAS } else { HIDDEN_BIAS };
                Dense::new(inputs, outputs, weights, vec![bias; outputs])
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        assert!(!layers.is_empty(), "network needs at least one layer");
        for pair in layers.windows(2) {
            assert_eq!(pair[0].outputs, pair[1].inputs, "layer widths do not chain");
        }
        assert_eq!(layers.last().map(|l| l.outputs), Some(1), "output must be scalar");
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Q-value of the normalized state `s_norm` under action encoding `a_norm`.
    pub fn forward(&self, s_norm: &[f64; 3], a_norm: f64) -> f64 {
        self.predict(&[s_norm[0], s_norm[1], s_norm[2], a_norm])
    }

    /// Output for an arbitrary input vector of length [`QNetwork::input_dim`].
    pub fn predict(&self, input: &[f64]) -> f64 {
        let mut cache = Activations::new(self);
        self.forward_cached(input, &mut cache)
    }

    fn forward_cached(&self, input: &[f64], cache: &mut Activations) -> f64 {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        cache.outputs[0].copy_from_slice(input);
        let hidden = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, after) = cache.outputs.split_at_mut(i + 1);
            let z = &mut cache.pre[i];
            layer.affine(&before[i], z);
            let out = &mut after[0];
            if i < hidden {
                for (o, &v) in out.iter_mut().zip(z.iter()) {
                    *o = v.max(0.0);
                }
            } else {
                out.copy_from_slice(z);
            }
        }
        cache.outputs[self.layers.len()][0]
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Accumulates `d_out * dQ/dtheta` for the input last passed through `cache`.
    fn backward(&self, cache: &Activations, d_out: f64, grads: &mut Gradients, scratch: &mut [Vec<f64>]) {
        let n = self.layers.len();
        scratch[n - 1].clear();
        scratch[n - 1].push(d_out);
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let input = &cache.outputs[i];
            // delta holds dL/dz for layer i
            let (lower, upper) = scratch.split_at_mut(i);
            let delta = &upper[0];
            let gw = &mut grads.weights[i];
            let gb = &mut grads.biases[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if i == 0 {
                break;
            }
            let prev = &mut lower[i - 1];
            prev.clear();
            prev.resize(layer.inputs, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, &z) in prev.iter_mut().zip(&cache.pre[i - 1]) {
                if z <= 0.0 {
                    *p = 0.0;
                }
            }
        }
    }

    /// Mean squared error over `(inputs, targets)` and its parameter gradient.
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Gradients) {
        assert_eq!(inputs.len(), targets.len(), "inputs and targets differ in length");
        let mut grads = self.zero_gradients();
        if inputs.is_empty() {
            return (0.0, grads);
        }
        let batch = inputs.len() as f64;
        let mut cache = Activations::new(self);
        let mut scratch = vec![Vec::with_capacity(64); self.layers.len()];
        let mut loss = 0.0;
        for (x, &t) in inputs.iter().zip(targets) {
            let q = self.forward_cached(x, &mut cache);
            let err = q - t;
            loss += err * err;
            self.backward(&cache, 2.0 * err / batch, &mut grads, &mut scratch);
        }
        (loss / batch, grads)
    }

    /// Mean squared error without the gradient.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
        let mut cache = Activations::new(self);
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, &t)| {
                let err = self.forward_cached(x, &mut cache) - t;
                err * err
            })
            .sum();
        total / inputs.len().max(1) as f64
    }

    fn step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= lr * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
    }

    /// Flat text dump: one block per layer, weights row-major, then biases,
    /// nine significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let _ = writeln!(out, "layer {} {}x{}", i, layer.outputs, layer.inputs);
            for row in layer.weights.chunks_exact(layer.inputs) {
                let line: Vec<String> = row.iter().map(|&v| sig9(v)).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
            let biases: Vec<String> = layer.biases.iter().map(|&v| sig9(v)).collect();
            let _ = writeln!(out, "bias {}", biases.join(" "));
            out.push('\n');
        }
        out
    }

    fn parameter_mut(&mut self, index: ParamIndex) -> &mut f64 {
        let layer = &mut self.layers[index.layer];
        if index.bias {
            &mut layer.biases[index.offset]
        } else {
            &mut layer.weights[index.offset]
        }
    }

    fn parameter_indices(&self) -> Vec<ParamIndex> {
        let mut all = Vec::with_capacity(self.parameter_count());
        for (layer, l) in self.layers.iter().enumerate() {
            all.extend((0..l.weights.len()).map(|offset| ParamIndex {
                layer,
                bias: false,
                offset,
            }));
            all.extend((0..l.biases.len()).map(|offset| ParamIndex {
                layer,
                bias: true,
                offset,
            }));
        }
        all
    }

    fn activation_pattern(&self, input: &[f64]) -> Vec<bool> {
        let mut cache = Activations::new(self);
        self.forward_cached(input, &mut cache);
        cache.pre[..self.layers.len() - 1]
            .iter()
            .flatten()
            .map(|&z| z > 0.0)
            .collect()
    }
}

/// Builds a freshly initialized value network.
pub fn init_network<R: Rng + ?Sized>(rng: &mut R) -> QNetwork {
    QNetwork::init(rng)
}

#[derive(Debug, Clone, Copy)]
struct ParamIndex {
    layer: usize,
    bias: bool,
    offset: usize,
}

/// Per-layer pre-activations and outputs of the most recent forward pass.
struct Activations {
    pre: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Activations {
    fn new(net: &QNetwork) -> Self {
        let mut outputs = vec![vec![0.0; net.input_dim()]];
        outputs.extend(net.layers.iter().map(|l| vec![0.0; l.outputs]));
        Self {
            pre: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            outputs,
        }
    }
}

/// Hyperparameters of one training session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    /// Inverse-time decay: `lr_t = learning_rate / (1 + lr_decay * t)`.
    pub lr_decay: f64,
    pub max_iters: usize,
    /// Discount factor.
    pub gamma: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            lr_decay: 1e-4,
            max_iters: 80_000,
            gamma: 0.9,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.lr_decay.is_nan() || self.lr_decay < 0.0 {
            return Err(Error::InvalidConfig("learning-rate decay must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig("gamma must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Step size at iteration `t` (zero-based).
    pub fn learning_rate_at(&self, t: usize) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * t as f64)
    }
}

/// Per-column min-max statistics of a training sample.
///
/// The action column is pinned to `[1, k]` so that actions always encode as
/// `(index - 1) / (k - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub min: [f64; RECORD_COLUMNS],
    pub max: [f64; RECORD_COLUMNS],
}

/// Column positions inside a record.
pub mod column {
    pub const CON: usize = 0;
    pub const FEA: usize = 1;
    pub const DIV: usize = 2;
    pub const OP: usize = 3;
    pub const REWARD: usize = 4;
    pub const NEXT_CON: usize = 5;
}

impl NormStats {
    pub fn from_records(records: &[Record]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("training records"));
        }
        let mut min = [f64::INFINITY; RECORD_COLUMNS];
        let mut max = [f64::NEG_INFINITY; RECORD_COLUMNS];
        for r in records {
            for (c, v) in r.columns().into_iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        min[column::OP] = 1.0;
        max[column::OP] = OperatorId::ALL.len() as f64;
        Ok(Self { min, max })
    }

    /// Maps `v` into `[0, 1]` for column `col`; a constant column maps to 0.5.
    pub fn normalize(&self, col: usize, v: f64) -> f64 {
        let span = self.max[col] - self.min[col];
        if span > 0.0 {
            (v - self.min[col]) / span
        } else {
            0.5
        }
    }

    pub fn denormalize(&self, col: usize, v: f64) -> f64 {
        let span = self.max[col] - self.min[col];
        if span > 0.0 {
            self.min[col] + v * span
        } else {
            self.min[col]
        }
    }

    /// Normalized current state `s` (columns 0..3).
    pub fn state(&self, s: &PopulationState) -> [f64; 3] {
        self.state_at(s, column::CON)
    }

    /// Normalized next state `s'` (columns 5..8).
    pub fn next_state(&self, s: &PopulationState) -> [f64; 3] {
        self.state_at(s, column::NEXT_CON)
    }

    /// Normalized state for prediction, clamped to `[0, 1]`.
    pub fn prediction_state(&self, s: &PopulationState) -> [f64; 3] {
        self.state(s).map(|v| v.clamp(0.0, 1.0))
    }

    fn state_at(&self, s: &PopulationState, first: usize) -> [f64; 3] {
        let v = s.as_array();
        [
            self.normalize(first, v[0]),
            self.normalize(first + 1, v[1]),
            self.normalize(first + 2, v[2]),
        ]
    }
}

/// Network input `(s_norm, a_norm)` of a record.
pub fn record_input(record: &Record, norm: &NormStats) -> Vec<f64> {
    let s = norm.state(&record.s);
    vec![
        s[0],
        s[1],
        s[2],
        norm.normalize(column::OP, record.op.index() as f64),
    ]
}

/// Largest Q-value over the action set for a normalized state.
pub fn max_q(net: &QNetwork, s_norm: &[f64; 3]) -> f64 {
    OperatorId::ALL
        .iter()
        .map(|op| net.forward(s_norm, op.encoding()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Frozen regression targets `r_norm + gamma * max_a Q(s'_norm, a)`.
pub fn compute_targets(net: &QNetwork, records: &[Record], norm: &NormStats, gamma: f64) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            let reward = norm.normalize(column::REWARD, r.reward);
            if gamma == 0.0 {
                reward
            } else {
                reward + gamma * max_q(net, &norm.next_state(&r.s_next))
            }
        })
        .collect()
}

/// Result of [`train_session`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: QNetwork,
    pub norm: NormStats,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

/// One full training session on `records`, starting from `net`.
pub fn train_session(net: &QNetwork, records: &[Record], hyper: &TrainHyper) -> Result<TrainOutcome> {
    hyper.validate()?;
    let norm = NormStats::from_records(records)?;
    let targets = compute_targets(net, records, &norm, hyper.gamma);
    let inputs: Vec<Vec<f64>> = records.iter().map(|r| record_input(r, &norm)).collect();
    let mut network = net.clone();
    let initial_loss = network.loss(&inputs, &targets);
    for t in 0..hyper.max_iters {
        let (_, grads) = network.loss_and_gradient(&inputs, &targets);
        network.step(&grads, hyper.learning_rate_at(t));
    }
    let final_loss = network.loss(&inputs, &targets);
    Ok(TrainOutcome {
        network,
        norm,
        initial_loss,
        final_loss,
        iterations: hyper.max_iters,
    })
}

/// Outcome of comparing backpropagation against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Parameters skipped because a perturbation crossed a ReLU kink.
    pub skipped: usize,
}

/// Relative error `|a - b| / max(|a| + |b|, 1e-6)`; gradients below the
/// floor are compared on an absolute scale.
fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Maximum relative error between the analytic gradient of the squared
/// error `(Q(input) - target)^2` and central finite differences.
pub fn gradient_check(net: &QNetwork, input: &[f64], target: f64) -> f64 {
    gradient_check_with_step(net, input, target, GRADIENT_CHECK_STEP).max_relative_error
}

/// [`gradient_check`] with an explicit step, reporting skipped parameters.
pub fn gradient_check_with_step(net: &QNetwork, input: &[f64], target: f64, h: f64) -> GradientCheckReport {
    let inputs = [input.to_vec()];
    let targets = [target];
    let (_, analytic) = net.loss_and_gradient(&inputs, &targets);
    let base_pattern = net.activation_pattern(input);
    let mut probe = net.clone();
    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for idx in net.parameter_indices() {
        let original = *probe.parameter_mut(idx);
        *probe.parameter_mut(idx) = original + h;
        let plus_pattern = probe.activation_pattern(input);
        let plus = probe.loss(&inputs, &targets);
        *probe.parameter_mut(idx) = original - h;
        let minus_pattern = probe.activation_pattern(input);
        let minus = probe.loss(&inputs, &targets);
        *probe.parameter_mut(idx) = original;
        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let exact = if idx.bias {
            analytic.biases[idx.layer][idx.offset]
        } else {
            analytic.weights[idx.layer][idx.offset]
        };
        report.max_relative_error = report.max_relative_error.max(relative_error(exact, numeric));
        report.checked += 1;
    }
    report
}
