//! Fully connected feed-forward network with rectifier hidden layers and a
//! softmax (classifier) or per-unit logistic (success) output layer.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logs.
pub const PROB_CLAMP: f64 = 1e-12;

const MAGIC: &str = "osd-mlp v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// Softmax over orders: distribution of the minimal successful order.
    Classifier,
    /// Independent logistic units: per-order probability of success.
    Success,
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputMode::Classifier => "classifier",
            OutputMode::Success => "success",
        })
    }
}

impl FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classifier" => Ok(OutputMode::Classifier),
            "success" => Ok(OutputMode::Success),
            other => Err(Error::Config(format!(
                "unknown model mode {other:?} (expected classifier or success)"
            ))),
        }
    }
}

/// One affine layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    mode: OutputMode,
    dims: Vec<usize>,
    layers: Vec<Dense>,
}

/// Targets for one mini-batch.
#[derive(Debug, Clone)]
pub struct Targets {
    /// Class index per row (classifier mode).
    pub labels: Vec<usize>,
    /// `rows x outputs` success indicators in {0, 1} (success mode).
    pub success: Array2<f64>,
}

impl MlpModel {
    /// He-uniform initialisation for rectifier layers, Glorot-uniform for the
    /// output layer, zero biases.
    pub fn new(dims: &[usize], mode: OutputMode, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Dimension(format!("invalid layer dims {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = if i == last {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in as f64).sqrt()
                };
                Dense {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| {
                        rng.random_range(-limit..limit)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(MlpModel {
            mode,
            dims: dims.to_vec(),
            layers,
        })
    }

    /// Layout used for order prediction: input `(z, 2a0 - 1)` of width `2n`,
    /// hidden widths `n` and `k`, one output per order `0..=l_max`.
    pub fn for_code(n: usize, k: usize, l_max: usize, mode: OutputMode, seed: u64) -> Result<Self> {
        MlpModel::new(&[2 * n, n, k, l_max + 1], mode, seed)
    }

    pub fn zeros(dims: &[usize], mode: OutputMode) -> Result<Self> {
        let mut m = MlpModel::new(dims, mode, 0)?;
        for layer in &mut m.layers {
            layer.weights.fill(0.0);
        }
        Ok(m)
    }

    pub fn mode(&self) -> OutputMode {
        self.mode
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flattened parameter access in storage order (weights then bias, per layer).
    pub fn parameter(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.weights.len() {
                return l.weights.as_slice().expect("standard layout")[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_parameter(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.weights.len() {
                l.weights.as_slice_mut().expect("standard layout")[idx] = value;
                return;
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                l.bias[idx] = value;
                return;
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "{} features for a model with input width {}",
                features.len(),
                self.input_dim()
            )));
        }
        let x = ArrayView2::from_shape((1, features.len()), features)
            .expect("contiguous slice");
        Ok(self.forward_batch(x).row(0).to_vec())
    }

    /// Output probabilities for each row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let cache = self.forward_cached(x);
        cache.output
    }

    fn forward_cached(&self, x: ArrayView2<'_, f64>) -> ForwardCache {
        let mut activations = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        let mut logits = Array2::zeros((0, 0));
        for (i, layer) in self.layers.iter().enumerate() {
            let mut pre = activations[i].dot(&layer.weights.t());
            pre += &layer.bias;
            if i == last {
                logits = pre;
            } else {
                pre.mapv_inplace(|v| v.max(0.0));
                activations.push(pre);
            }
        }
        let output = match self.mode {
            OutputMode::Classifier => softmax_rows(&logits),
            OutputMode::Success => logits.mapv(logistic),
        };
        ForwardCache {
            activations,
            output,
        }
    }

    /// Mean loss over the batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, targets: &Targets) -> f64 {
        let out = self.forward_batch(x);
        batch_loss(self.mode, &out, targets)
    }

    /// Mean loss and its gradient with respect to every layer.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, targets: &Targets) -> (f64, Vec<Dense>) {
        let cache = self.forward_cached(x);
        let loss = batch_loss(self.mode, &cache.output, targets);
        let rows = x.nrows() as f64;

        // Gradient at the output logits.
        let mut delta = match self.mode {
            OutputMode::Classifier => {
                let mut d = cache.output.clone();
                for (r, &label) in targets.labels.iter().enumerate() {
                    d[[r, label]] -= 1.0;
                }
                d / rows
            }
            OutputMode::Success => {
                let outputs = cache.output.ncols() as f64;
                (&cache.output - &targets.success) / (rows * outputs)
            }
        };

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &cache.activations[i];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                // Rectifier derivative from the stored post-activation.
                ndarray::Zip::from(&mut back)
                    .and(input)
                    .for_each(|g, &a| {
                        if a <= 0.0 {
                            *g = 0.0
                        }
                    });
                delta = back;
            }
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        s.push_str(&format!("mode {}\n", self.mode));
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        s.push_str(&format!("dims {}\n", dims.join(" ")));
        for (i, layer) in self.layers.iter().enumerate() {
            s.push_str(&format!("layer {i} weights\n"));
            for row in layer.weights.rows() {
                push_floats(&mut s, row.iter());
            }
            s.push_str(&format!("layer {i} bias\n"));
            push_floats(&mut s, layer.bias.iter());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("model file truncated before {what}")))
        };
        if next("header")? != MAGIC {
            return Err(Error::Parse("not a model file".into()));
        }
        let mode: OutputMode = next("mode")?
            .strip_prefix("mode ")
            .ok_or_else(|| Error::Parse("missing mode line".into()))?
            .parse()?;
        let dims: Vec<usize> = next("dims")?
            .strip_prefix("dims ")
            .ok_or_else(|| Error::Parse("missing dims line".into()))?
            .split(' ')
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad layer width {t:?}")))
            })
            .collect::<Result<_>>()?;
        let mut model = MlpModel::zeros(&dims, mode)?;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let header = next("layer header")?;
            if header != format!("layer {i} weights") {
                return Err(Error::Parse(format!("expected weights of layer {i}, got {header:?}")));
            }
            let (rows, cols) = layer.weights.dim();
            for r in 0..rows {
                let vals = parse_floats(next("weights")?, cols)?;
                for (c, v) in vals.into_iter().enumerate() {
                    layer.weights[[r, c]] = v;
                }
            }
            let header = next("bias header")?;
            if header != format!("layer {i} bias") {
                return Err(Error::Parse(format!("expected bias of layer {i}, got {header:?}")));
            }
            layer.bias = Array1::from(parse_floats(next("bias")?, rows)?);
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        MlpModel::from_text(&text)
    }
}

struct ForwardCache {
    // Input followed by each hidden post-activation.
    activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

fn push_floats<'a>(s: &mut String, vals: impl Iterator<Item = &'a f64>) {
    let parts: Vec<String> = vals.map(|v| format!("{v}")).collect();
    s.push_str(&parts.join(" "));
    s.push('\n');
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split(' ')
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad weight {t:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} values on a line, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

#[inline]
fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub(crate) fn batch_loss(mode: OutputMode, out: &Array2<f64>, targets: &Targets) -> f64 {
    let rows = out.nrows() as f64;
    match mode {
        OutputMode::Classifier => {
            let total: f64 = targets
                .labels
                .iter()
                .enumerate()
                .map(|(r, &label)| -clamp_prob(out[[r, label]]).ln())
                .sum();
            total / rows
        }
        OutputMode::Success => {
            let total: f64 = ndarray::Zip::from(out)
                .and(&targets.success)
                .fold(0.0, |acc, &p, &t| {
                    let p = clamp_prob(p);
                    acc - (t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                });
            total / (rows * out.ncols() as f64)
        }
    }
}
