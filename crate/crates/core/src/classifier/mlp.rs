use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{evaluate_scores, EvalReport};
use super::standardize::{apply_standardizer, Standardizer};
use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};

/// One hidden ReLU layer and a sigmoid output unit.
///
/// Parameters live in one flat vector laid out as `W1` (hidden × input,
/// row-major), `b1`, `w2`, `b2`, which is also the layout of gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl Mlp {
    pub fn n_params(input_dim: usize, hidden: usize) -> usize {
        hidden * input_dim + 2 * hidden + 1
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Mlp {
            input_dim,
            hidden,
            params: vec![0.0; Self::n_params(input_dim, hidden)],
        }
    }

    pub fn from_params(input_dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::n_params(input_dim, hidden);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite MLP parameter".into()));
        }
        Ok(Mlp {
            input_dim,
            hidden,
            params,
        })
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut m = Mlp::zeros(input_dim, hidden);
        if input_dim > 0 {
            let a = 1.0 / (input_dim as f64).sqrt();
            for w in m.w1_mut() {
                *w = rng.random_range(-a..a);
            }
        }
        let a = 1.0 / (hidden as f64).sqrt();
        let off = hidden * input_dim + hidden;
        for w in &mut m.params[off..off + hidden] {
            *w = rng.random_range(-a..a);
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_mut(&mut self) -> &mut [f64] {
        let n = self.hidden * self.input_dim;
        &mut self.params[..n]
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (h, d) = (self.hidden, self.input_dim);
        let (w1, rest) = self.params.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        (w1, b1, w2, rest[0])
    }

    fn hidden_pre(&self, x: &[f64], out: &mut Vec<f64>) {
        let (w1, b1, _, _) = self.split();
        let d = self.input_dim;
        out.clear();
        out.extend((0..self.hidden).map(|k| {
            b1[k] + w1[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.hidden);
        self.hidden_pre(x, &mut pre);
        let (_, _, w2, b2) = self.split();
        Ok(b2 + pre.iter().zip(w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy written in terms of the logit.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

fn target(label: Label) -> f64 {
    if label.is_positive() {
        1.0
    } else {
        0.0
    }
}

/// `sigmoid(w2 · relu(W1 x + b1) + b2)`.
pub fn mlp_forward(model: &Mlp, x: &[f64]) -> Result<f64> {
    model.logit(x).map(sigmoid)
}

/// Mean binary cross-entropy over the batch and its exact gradient.
pub fn mlp_gradient(model: &Mlp, xs: &[&[f64]], ys: &[Label]) -> Result<(f64, Vec<f64>)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "gradient needs a non-empty batch with one label per row ({} rows, {} labels)",
            xs.len(),
            ys.len()
        )));
    }
    let (h, d) = (model.hidden, model.input_dim);
    let (_, _, w2, b2) = model.split();
    let mut grad = vec![0.0; model.params.len()];
    let mut pre = Vec::with_capacity(h);
    let mut loss = 0.0;
    let (ob1, ow2, ob2) = (h * d, h * d + h, h * d + 2 * h);
    for (x, &label) in xs.iter().zip(ys) {
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        model.hidden_pre(x, &mut pre);
        let z = b2 + pre.iter().zip(w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>();
        let y = target(label);
        loss += bce_from_logit(z, y);
        let dz = sigmoid(z) - y;
        grad[ob2] += dz;
        for k in 0..h {
            if pre[k] > 0.0 {
                grad[ow2 + k] += dz * pre[k];
                let dpre = dz * w2[k];
                grad[ob1 + k] += dpre;
                for (g, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x.iter()) {
                    *g += dpre * xi;
                }
            }
        }
    }
    let n = xs.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Per-parameter step divided by the root of accumulated squared gradients.
    Adagrad,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 8,
            learning_rate: 0.001,
            epochs: 300,
            batch_size: 8,
            seed: 0,
            optimizer: Optimizer::Adagrad,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter("batch_size and hidden must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    /// Mean training loss before the first epoch and after each epoch.
    pub train_loss: Vec<f64>,
    /// Same for the validation split, when one was given.
    pub val_loss: Vec<f64>,
    /// Index into the traces of the returned parameters.
    pub best_epoch: usize,
}

fn mean_loss(model: &Mlp, x: &FeatureMatrix, y: &[Label]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &l) in y.iter().enumerate() {
        total += bce_from_logit(model.logit(x.row(i))?, target(l));
    }
    Ok(total / y.len() as f64)
}

/// Trains on already standardized features. With a validation split, the
/// parameters with the lowest validation loss are returned.
pub fn mlp_train(
    x: &FeatureMatrix,
    y: &[Label],
    config: &TrainConfig,
    validation: Option<(&FeatureMatrix, &[Label])>,
) -> Result<(Mlp, TrainTrace)> {
    config.validate()?;
    if y.len() != x.n_instances() {
        return Err(Error::DimensionMismatch {
            expected: x.n_instances(),
            actual: y.len(),
        });
    }
    for label in [Label::Normal, Label::Glaucoma] {
        if !y.contains(&label) {
            return Err(Error::InsufficientClass {
                label: label.as_u8(),
                count: 0,
                needed: 1,
            });
        }
    }
    let validation = validation.filter(|(vx, _)| vx.n_instances() > 0);
    if let Some((vx, vy)) = validation {
        if vx.n_features() != x.n_features() || vy.len() != vx.n_instances() {
            return Err(Error::DimensionMismatch {
                expected: x.n_features(),
                actual: vx.n_features(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Mlp::init(x.n_features(), config.hidden, &mut rng);
    let mut trace = TrainTrace {
        train_loss: vec![mean_loss(&model, x, y)?],
        ..Default::default()
    };
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    if let Some((vx, vy)) = validation {
        best_val = mean_loss(&model, vx, vy)?;
        trace.val_loss.push(best_val);
    }

    let mut accum = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..y.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| x.row(i)).collect();
            let ys: Vec<Label> = batch.iter().map(|&i| y[i]).collect();
            let (_, grad) = mlp_gradient(&model, &xs, &ys)?;
            match config.optimizer {
                Optimizer::Adagrad => {
                    for ((p, g), a) in model.params.iter_mut().zip(&grad).zip(&mut accum) {
                        *a += g * g;
                        *p -= config.learning_rate * g / (a.sqrt() + config.epsilon);
                    }
                }
                Optimizer::Sgd => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= config.learning_rate * g;
                    }
                }
            }
        }
        trace.train_loss.push(mean_loss(&model, x, y)?);
        if let Some((vx, vy)) = validation {
            let v = mean_loss(&model, vx, vy)?;
            trace.val_loss.push(v);
            if v < best_val {
                best_val = v;
                best = model.clone();
                trace.best_epoch = epoch;
            }
        }
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateSignal("training diverged".into()));
    }
    if validation.is_some() {
        Ok((best, trace))
    } else {
        trace.best_epoch = config.epochs;
        Ok((model, trace))
    }
}

/// A network together with the feature names and standardizer it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub standardizer: Standardizer,
    pub mlp: Mlp,
}

const MODEL_HEADER: &str = "glaucoct-mlp v1";

fn fmt_row(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

impl TrainedModel {
    /// Scores raw (unstandardized) features; columns are picked by name.
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        let x = apply_standardizer(&self.standardizer, &matrix.select_named(&self.standardizer.names)?)?;
        (0..x.n_instances()).map(|i| mlp_forward(&self.mlp, x.row(i))).collect()
    }

    /// Versioned text form with 17 significant digits per value.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MODEL_HEADER}\n");
        let _ = writeln!(out, "input_dim {}", self.mlp.input_dim);
        let _ = writeln!(out, "hidden {}", self.mlp.hidden);
        out.push_str("features");
        for n in &self.standardizer.names {
            out.push(' ');
            out.push_str(n);
        }
        out.push('\n');
        fmt_row(&mut out, "mean", &self.standardizer.means);
        fmt_row(&mut out, "std", &self.standardizer.stds);
        let (w1, b1, w2, b2) = self.mlp.split();
        fmt_row(&mut out, "w1", w1);
        fmt_row(&mut out, "b1", b1);
        fmt_row(&mut out, "w2", w2);
        fmt_row(&mut out, "b2", &[b2]);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::Config {
            line,
            reason: format!("model file: {reason}"),
        };
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        if lines.next() != Some(MODEL_HEADER) {
            return Err(bad(1, "missing version header"));
        }
        let mut fields: Vec<(String, Vec<String>)> = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            if let Some(k) = it.next() {
                fields.push((k.to_string(), it.map(str::to_string).collect()));
            }
        }
        let get = |key: &str| -> Result<&Vec<String>> {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v)
                .ok_or_else(|| bad(0, &format!("missing {key}")))
        };
        let nums = |key: &str| -> Result<Vec<f64>> {
            get(key)?
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| bad(0, &format!("bad number in {key}"))))
                .collect()
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?
                .first()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(0, &format!("bad {key}")))
        };
        let input_dim = int("input_dim")?;
        let hidden = int("hidden")?;
        let names = get("features")?.clone();
        let standardizer = Standardizer {
            means: nums("mean")?,
            stds: nums("std")?,
            names,
        };
        if standardizer.names.len() != input_dim
            || standardizer.means.len() != input_dim
            || standardizer.stds.len() != input_dim
        {
            return Err(bad(0, "standardizer size differs from input_dim"));
        }
        let mut params = nums("w1")?;
        params.extend(nums("b1")?);
        params.extend(nums("w2")?);
        params.extend(nums("b2")?);
        Ok(TrainedModel {
            standardizer,
            mlp: Mlp::from_params(input_dim, hidden, params)?,
        })
    }
}

/// Scores a trained model on raw features and computes the evaluation report.
pub fn evaluate(model: &TrainedModel, matrix: &FeatureMatrix, labels: &[Label]) -> Result<EvalReport> {
    let scores = model.predict(matrix)?;
    Ok(evaluate_scores(&scores, labels))
}
