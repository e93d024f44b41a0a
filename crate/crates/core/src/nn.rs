//! From-scratch multilayer perceptron: sigmoid units, mean-square-error cost,
//! per-sample stochastic gradient descent with hand-written backpropagation.
//!
//! Weight matrices are stored next-layer-major: `weights[l][i][j]` is the
//! connection from unit `j` in layer `l` to unit `i` in layer `l + 1`, so a
//! forward step is `z = W a + b` row by row. Biases follow the same layout
//! (`biases[l][i]` belongs to unit `i` of layer `l + 1`). Everything is `f64`;
//! the finite-difference gradient check needs the headroom.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::Sample;

/// Largest `f64` strictly below 1; sigmoid outputs are clamped into
/// `[f64::MIN_POSITIVE, SIGMOID_CEIL]` so activations stay in open (0, 1).
const SIGMOID_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Step used by [`numerical_gradient`].
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input length {got} does not match input layer size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid layer sizes: {0}")]
    InvalidLayerSizes(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(&'static str),
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("training diverged: non-finite cost at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Fully connected feed-forward network with sigmoid activations everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    /// `weights[l][i][j]`: from unit `j` in layer `l` to unit `i` in layer `l + 1`.
    weights: Vec<Vec<Vec<f64>>>,
    /// `biases[l][i]`: bias of unit `i` in layer `l + 1`.
    biases: Vec<Vec<f64>>,
}

/// All intermediate values of one forward pass.
///
/// `activations[0]` is the raw input; `pre_activations[l]` and
/// `activations[l + 1]` belong to layer `l + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Activation vector of the output layer.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has at least two layers")
    }
}

/// Cost gradients shaped exactly like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weight_grads: Vec<Vec<Vec<f64>>>,
    pub bias_grads: Vec<Vec<f64>>,
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Consecutive epochs without validation improvement tolerated before
    /// stopping; 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
    /// Decision threshold used by [`MlpModel::predict`].
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            max_epochs: 500,
            patience: 20,
            seed: 1,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidTrainConfig("learning_rate must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(NnError::InvalidTrainConfig("max_epochs must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(NnError::InvalidTrainConfig("threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-epoch cost record returned by [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Numerically stable logistic function, clamped into open (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, SIGMOID_CEIL)
}

/// Sigmoid derivative expressed through the activation: `a * (1 - a)`
/// for `a = sigmoid(z)`.
pub fn sigmoid_prime_from_activation(a: f64) -> f64 {
    a * (1.0 - a)
}

impl MlpModel {
    /// Seeded initialization: weights uniform in [-0.5, 0.5], biases zero.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self, NnError> {
        validate_layer_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            weights.push(
                (0..n_out)
                    .map(|_| (0..n_in).map(|_| rng.gen_range(-0.5..=0.5)).collect())
                    .collect(),
            );
            biases.push(vec![0.0; n_out]);
        }
        Ok(MlpModel { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    /// Builds a model from explicit parameters, validating shapes and finiteness.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, NnError> {
        validate_layer_sizes(&layer_sizes)?;
        let n_steps = layer_sizes.len() - 1;
        if weights.len() != n_steps || biases.len() != n_steps {
            return Err(NnError::InvalidLayerSizes(format!(
                "expected {n_steps} weight/bias layers, got {}/{}",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..n_steps {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            if weights[l].len() != n_out || biases[l].len() != n_out {
                return Err(NnError::InvalidLayerSizes(format!(
                    "layer {l}: expected {n_out} rows/biases"
                )));
            }
            for row in &weights[l] {
                if row.len() != n_in {
                    return Err(NnError::InvalidLayerSizes(format!(
                        "layer {l}: expected rows of length {n_in}"
                    )));
                }
                if row.iter().any(|w| !w.is_finite()) {
                    return Err(NnError::InvalidLayerSizes(format!(
                        "layer {l}: non-finite weight"
                    )));
                }
            }
            if biases[l].iter().any(|b| !b.is_finite()) {
                return Err(NnError::InvalidLayerSizes(format!("layer {l}: non-finite bias")));
            }
        }
        Ok(MlpModel { layer_sizes, weights, biases })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Vec<Vec<f64>>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Feed-forward pass returning every pre-activation and activation.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace, NnError> {
        if input.len() != self.input_size() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(input.to_vec());
        let mut pre_activations = Vec::with_capacity(self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let prev = activations.last().expect("non-empty");
            let z: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bias)| {
                    row.iter().zip(prev).fold(*bias, |acc, (wij, aj)| acc + wij * aj)
                })
                .collect();
            activations.push(z.iter().map(|&v| sigmoid(v)).collect());
            pre_activations.push(z);
        }
        Ok(ForwardTrace { pre_activations, activations })
    }

    /// Binary decision: 1 (attack) iff the output strictly exceeds `threshold`.
    pub fn predict(&self, input: &[f64], threshold: f64) -> Result<u8, NnError> {
        let trace = self.forward(input)?;
        Ok(u8::from(trace.output()[0] > threshold))
    }

    /// One gradient-descent update: `theta -= learning_rate * grad`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        debug_assert_eq!(grads.weight_grads.len(), self.weights.len());
        for (w, g) in self.weights.iter_mut().zip(&grads.weight_grads) {
            for (row, grow) in w.iter_mut().zip(g) {
                for (wij, gij) in row.iter_mut().zip(grow) {
                    *wij -= learning_rate * gij;
                }
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.bias_grads) {
            for (bi, gi) in b.iter_mut().zip(g) {
                *bi -= learning_rate * gi;
            }
        }
    }

    /// Serializes the model to the line-oriented text format:
    /// a `mlp <n_layers> <sizes...>` header, then per layer one line of
    /// row-major weights and one line of biases, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("mlp ");
        out.push_str(&self.layer_sizes.len().to_string());
        for s in &self.layer_sizes {
            let _ = write!(out, " {s}");
        }
        out.push('\n');
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut first = true;
            for row in w {
                for v in row {
                    if !first {
                        out.push(' ');
                    }
                    let _ = write!(out, "{v:.16e}");
                    first = false;
                }
            }
            out.push('\n');
            let mut first = true;
            for v in b {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{v:.16e}");
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, NnError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| NnError::Parse { line: 1, msg: "empty model file".into() })?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("mlp") {
            return Err(NnError::Parse { line: 1, msg: "expected `mlp` header".into() });
        }
        let n_layers: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| NnError::Parse { line: 1, msg: "bad layer count".into() })?;
        let layer_sizes: Vec<usize> = tokens
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| NnError::Parse { line: 1, msg: format!("bad layer size: {e}") })?;
        if layer_sizes.len() != n_layers {
            return Err(NnError::Parse {
                line: 1,
                msg: format!("header claims {n_layers} layers, lists {}", layer_sizes.len()),
            });
        }
        let mut parse_floats = |expected: usize, what: &str| -> Result<Vec<f64>, NnError> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| NnError::Parse { line: 0, msg: format!("missing {what} line") })?;
            let lineno = idx + 1;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| NnError::Parse { line: lineno, msg: format!("bad float: {e}") })?;
            if vals.len() != expected {
                return Err(NnError::Parse {
                    line: lineno,
                    msg: format!("expected {expected} {what} values, got {}", vals.len()),
                });
            }
            Ok(vals)
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..n_layers.saturating_sub(1) {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let flat = parse_floats(n_in * n_out, "weight")?;
            weights.push(flat.chunks(n_in).map(<[f64]>::to_vec).collect());
            biases.push(parse_floats(n_out, "bias")?);
        }
        Self::from_parts(layer_sizes, weights, biases)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<(), NnError> {
    if layer_sizes.len() < 2 {
        return Err(NnError::InvalidLayerSizes("need at least 2 layers".into()));
    }
    if layer_sizes.contains(&0) {
        return Err(NnError::InvalidLayerSizes("every layer needs at least 1 unit".into()));
    }
    Ok(())
}

/// Output-layer error term: `delta_i = -(y - a_i) * a_i * (1 - a_i)`.
pub fn output_delta(y: f64, trace: &ForwardTrace) -> Vec<f64> {
    trace
        .output()
        .iter()
        .map(|&a| -(y - a) * sigmoid_prime_from_activation(a))
        .collect()
}

/// Backward recurrence over the hidden layers, front-of-list first:
/// `delta_i = (sum_j w[ji] * delta_next_j) * a_i * (1 - a_i)`.
pub fn hidden_deltas(model: &MlpModel, trace: &ForwardTrace, output_delta: &[f64]) -> Vec<Vec<f64>> {
    let n_layers = model.layer_sizes().len();
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); n_layers.saturating_sub(2)];
    let mut next = output_delta.to_vec();
    for layer in (1..n_layers - 1).rev() {
        let outgoing = &model.weights()[layer];
        let acts = &trace.activations[layer];
        let d: Vec<f64> = acts
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let back: f64 = outgoing.iter().zip(&next).map(|(row, dj)| row[i] * dj).sum();
                back * sigmoid_prime_from_activation(a)
            })
            .collect();
        deltas[layer - 1] = d.clone();
        next = d;
    }
    deltas
}

/// Assembles per-parameter gradients from the error terms:
/// `dJ/dw[l][i][j] = a[l][j] * delta[l+1][i]` and `dJ/db[l][i] = delta[l+1][i]`.
///
/// `deltas` holds one vector per non-input layer, hidden layers first,
/// output layer last.
pub fn gradients(trace: &ForwardTrace, deltas: &[Vec<f64>]) -> Gradients {
    let mut weight_grads = Vec::with_capacity(deltas.len());
    let mut bias_grads = Vec::with_capacity(deltas.len());
    for (l, delta) in deltas.iter().enumerate() {
        let prev = &trace.activations[l];
        weight_grads.push(
            delta
                .iter()
                .map(|&d| prev.iter().map(|&a| a * d).collect())
                .collect(),
        );
        bias_grads.push(delta.clone());
    }
    Gradients { weight_grads, bias_grads }
}

/// Full backpropagation for one sample: forward pass, error terms, gradients.
pub fn backprop(model: &MlpModel, input: &[f64], y: f64) -> Result<Gradients, NnError> {
    let trace = model.forward(input)?;
    let out_delta = output_delta(y, &trace);
    let mut deltas = hidden_deltas(model, &trace, &out_delta);
    deltas.push(out_delta);
    Ok(gradients(&trace, &deltas))
}

/// Cost of one sample: `0.5 * sum_i (y - out_i)^2`.
fn sample_cost(model: &MlpModel, input: &[f64], y: f64) -> Result<f64, NnError> {
    let trace = model.forward(input)?;
    Ok(trace.output().iter().map(|&a| (y - a).powi(2)).sum::<f64>() / 2.0)
}

/// Mean of the per-sample squared-error costs.
pub fn mse_cost(model: &MlpModel, samples: &[Sample]) -> Result<f64, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptySampleSet);
    }
    let mut total = 0.0;
    for s in samples {
        total += sample_cost(model, &s.features, f64::from(s.label))?;
    }
    Ok(total / samples.len() as f64)
}

/// Central finite differences of the per-sample cost with step [`FD_STEP`].
///
/// Verification oracle for [`backprop`]; used by tests and the
/// `check-gradients` command, never by training itself.
pub fn numerical_gradient(model: &MlpModel, input: &[f64], y: f64) -> Result<Gradients, NnError> {
    numerical_gradient_with_step(model, input, y, FD_STEP)
}

/// Same as [`numerical_gradient`] with an explicit step size.
pub fn numerical_gradient_with_step(
    model: &MlpModel,
    input: &[f64],
    y: f64,
    step: f64,
) -> Result<Gradients, NnError> {
    let mut probe = model.clone();
    let mut weight_grads = probe.weights.clone();
    let mut bias_grads = probe.biases.clone();
    for l in 0..model.weights.len() {
        for i in 0..model.weights[l].len() {
            for j in 0..model.weights[l][i].len() {
                let orig = probe.weights[l][i][j];
                probe.weights[l][i][j] = orig + step;
                let plus = sample_cost(&probe, input, y)?;
                probe.weights[l][i][j] = orig - step;
                let minus = sample_cost(&probe, input, y)?;
                probe.weights[l][i][j] = orig;
                weight_grads[l][i][j] = (plus - minus) / (2.0 * step);
            }
        }
        for i in 0..model.biases[l].len() {
            let orig = probe.biases[l][i];
            probe.biases[l][i] = orig + step;
            let plus = sample_cost(&probe, input, y)?;
            probe.biases[l][i] = orig - step;
            let minus = sample_cost(&probe, input, y)?;
            probe.biases[l][i] = orig;
            bias_grads[l][i] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(Gradients { weight_grads, bias_grads })
}

/// Stochastic training loop: per-sample updates in an order reshuffled every
/// epoch from a per-epoch RNG stream, with optional early stopping on
/// validation cost. Returns the snapshot with the best validation MSE and the
/// full epoch history.
pub fn train(
    model: MlpModel,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<(MlpModel, Vec<EpochStats>), NnError> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NnError::EmptySampleSet);
    }
    for s in train_set.iter().chain(val_set) {
        if s.features.len() != model.input_size() {
            return Err(NnError::DimensionMismatch {
                expected: model.input_size(),
                got: s.features.len(),
            });
        }
    }

    let mut model = model;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale_epochs = 0usize;

    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        for &idx in &order {
            let s = &train_set[idx];
            let grads = backprop(&model, &s.features, f64::from(s.label))?;
            model.sgd_step(&grads, config.learning_rate);
        }
        let train_mse = mse_cost(&model, train_set)?;
        let val_mse = mse_cost(&model, val_set)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(NnError::Diverged { epoch });
        }
        history.push(EpochStats { epoch, train_mse, val_mse });
        match &best {
            Some((best_val, _)) if val_mse >= *best_val => {
                stale_epochs += 1;
                if config.patience > 0 && stale_epochs >= config.patience {
                    break;
                }
            }
            _ => {
                best = Some((val_mse, model.clone()));
                stale_epochs = 0;
            }
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}

/// Outcome of [`gradient_check_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckSummary {
    pub cases: usize,
    pub entries: usize,
    pub failures: usize,
    pub max_rel_err: f64,
}

impl GradientCheckSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Relative tolerance for comparing analytic and numerical gradients.
pub const GRAD_CHECK_REL_TOL: f64 = 1e-5;
/// Absolute floor below which entries are compared absolutely.
pub const GRAD_CHECK_ABS_FLOOR: f64 = 1e-8;

/// Architectures the gradient check cycles through.
pub const GRAD_CHECK_SHAPES: [&[usize]; 3] = [&[2, 2, 1], &[6, 3, 1], &[4, 5, 3, 1]];

/// Compares backpropagation against central finite differences on `cases`
/// random (model, sample) pairs drawn across [`GRAD_CHECK_SHAPES`]. An entry
/// fails when `|a - n| > max(GRAD_CHECK_ABS_FLOOR, GRAD_CHECK_REL_TOL * max(|a|, |n|))`.
pub fn gradient_check_suite(seed: u64, cases: usize) -> Result<GradientCheckSummary, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary =
        GradientCheckSummary { cases, entries: 0, failures: 0, max_rel_err: 0.0 };
    for case in 0..cases {
        let shape = GRAD_CHECK_SHAPES[case % GRAD_CHECK_SHAPES.len()];
        let model = MlpModel::init(shape, rng.gen())?;
        let input: Vec<f64> = (0..shape[0]).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let y = f64::from(u8::from(rng.gen_bool(0.5)));
        let analytic = backprop(&model, &input, y)?;
        let numeric = numerical_gradient(&model, &input, y)?;
        for (ag, ng) in flatten(&analytic).into_iter().zip(flatten(&numeric)) {
            summary.entries += 1;
            let diff = (ag - ng).abs();
            let scale = ag.abs().max(ng.abs());
            if diff > GRAD_CHECK_ABS_FLOOR.max(GRAD_CHECK_REL_TOL * scale) {
                summary.failures += 1;
            }
            if scale > GRAD_CHECK_ABS_FLOOR {
                summary.max_rel_err = summary.max_rel_err.max(diff / scale);
            }
        }
    }
    Ok(summary)
}

fn flatten(grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &grads.weight_grads {
        for row in layer {
            out.extend_from_slice(row);
        }
    }
    for layer in &grads.bias_grads {
        out.extend_from_slice(layer);
    }
    out
}
