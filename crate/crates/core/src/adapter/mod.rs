//! Residual bottleneck adapters over frozen tokens, temperature-scaled cosine
//! similarity, and the cross-entropy grounding objective.
//!
//! Each adapter is `W3 relu(W2 relu(W1 x + b1) + b2) + b3`, mixed with its input
//! as `gate * A(x) + (1 - gate) * x`. Weights are stored as `f32` (the file
//! precision); all arithmetic runs in `f64`.

mod backward;
mod io;
mod train;

pub use backward::{backward, Gradients};
pub use io::{load_weights, load_weights_expecting, save_weights, read_weights, write_weights};
pub use train::{mean_loss,
    grounding_accuracy, prepare_samples, train, train_prepared, Optimizer, PreparedSample,
    TrainConfig, TrainOutcome, TrainSample,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::{TokenMatrix, DEFAULT_DIM};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 112;
pub const DEFAULT_GATE: f64 = 0.2;
pub const DEFAULT_TEMPERATURE: f64 = 0.01;
const LOG_CLAMP: f64 = 1e-12;

/// Shape and mixing hyperparameters of an [`AdapterPair`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    pub dim: usize,
    pub hidden: usize,
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            hidden: DEFAULT_HIDDEN,
            alpha: DEFAULT_GATE,
            beta: DEFAULT_GATE,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidInput("adapter dims must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidInput("gates must lie in [0, 1]".into()));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::InvalidInput("temperature must be positive".into()));
        }
        Ok(())
    }

    /// Trainable parameters of both adapters.
    pub fn parameter_count(&self) -> usize {
        let (d, h) = (self.dim, self.hidden);
        2 * ((d * h + h) + (h * h + h) + (h * d + d))
    }
}

/// One three-layer bottleneck network; matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterWeights {
    pub dim: usize,
    pub hidden: usize,
    /// hidden x dim
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    /// hidden x hidden
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
    /// dim x hidden
    pub w3: Vec<f32>,
    pub b3: Vec<f32>,
}

/// Intermediate values of one row, kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct RowCache {
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub z2: Vec<f64>,
    pub a2: Vec<f64>,
}

fn affine(w: &[f32], b: &[f32], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        *o = f64::from(b[i]) + row.iter().zip(x).map(|(&a, &b)| f64::from(a) * b).sum::<f64>();
    }
}

impl AdapterWeights {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            dim,
            hidden,
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * hidden],
            b2: vec![0.0; hidden],
            w3: vec![0.0; dim * hidden],
            b3: vec![0.0; dim],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer, weights and biases alike.
    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros(dim, hidden);
        let mut fill = |v: &mut [f32], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in v {
                *x = rng.random_range(-bound..bound) as f32;
            }
        };
        fill(&mut w.w1, dim);
        fill(&mut w.b1, dim);
        fill(&mut w.w2, hidden);
        fill(&mut w.b2, hidden);
        fill(&mut w.w3, hidden);
        fill(&mut w.b3, hidden);
        w
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// W1, b1, W2, b2, W3, b3.
    pub fn tensors(&self) -> [&[f32]; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f32]; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    /// `A(x)` for one row, filling `cache` and returning the adapter output.
    pub(crate) fn forward_row(&self, x: &[f64], cache: &mut RowCache) -> Vec<f64> {
        let h = self.hidden;
        cache.z1.resize(h, 0.0);
        cache.z2.resize(h, 0.0);
        affine(&self.w1, &self.b1, x, &mut cache.z1);
        cache.a1 = cache.z1.iter().map(|&z| z.max(0.0)).collect();
        affine(&self.w2, &self.b2, &cache.a1, &mut cache.z2);
        cache.a2 = cache.z2.iter().map(|&z| z.max(0.0)).collect();
        let mut y = vec![0.0; self.dim];
        affine(&self.w3, &self.b3, &cache.a2, &mut y);
        y
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Visual and textual adapters with their gates and the softmax temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterPair {
    pub visual: AdapterWeights,
    pub textual: AdapterWeights,
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
}

impl AdapterPair {
    /// Fresh seeded initialization.
    pub fn init(cfg: &AdapterConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let visual = AdapterWeights::init(cfg.dim, cfg.hidden, &mut rng);
        let textual = AdapterWeights::init(cfg.dim, cfg.hidden, &mut rng);
        Ok(Self {
            visual,
            textual,
            alpha: cfg.alpha,
            beta: cfg.beta,
            temperature: cfg.temperature,
        })
    }

    pub fn config(&self) -> AdapterConfig {
        AdapterConfig {
            dim: self.visual.dim,
            hidden: self.visual.hidden,
            alpha: self.alpha,
            beta: self.beta,
            temperature: self.temperature,
        }
    }

    pub fn dim(&self) -> usize {
        self.visual.dim
    }

    pub fn parameter_count(&self) -> usize {
        self.visual.parameter_count() + self.textual.parameter_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.config().validate()?;
        if self.visual.dim != self.textual.dim || self.visual.hidden != self.textual.hidden {
            return Err(Error::Shape("visual and textual adapters differ in shape".into()));
        }
        if !(self.visual.is_finite() && self.textual.is_finite()) {
            return Err(Error::InvalidInput("adapter weights contain non-finite values".into()));
        }
        Ok(())
    }

    /// Adapted visual and textual tokens.
    pub fn adapt(&self, visual: &TokenMatrix, textual: &TokenMatrix) -> Result<(TokenMatrix, TokenMatrix)> {
        Ok((
            adapter_forward(&self.visual, self.alpha, visual)?,
            adapter_forward(&self.textual, self.beta, textual)?,
        ))
    }

    /// `P = softmax(cos(T*, V*) / tau)` for raw tokens.
    pub fn probabilities(&self, visual: &TokenMatrix, textual: &TokenMatrix) -> Result<ProbMatrix> {
        let (v, t) = self.adapt(visual, textual)?;
        similarity_probs(&v, &t, self.temperature)
    }
}

/// `gate * A(X) + (1 - gate) * X` row by row; rows are not re-normalized.
pub fn adapter_forward(w: &AdapterWeights, gate: f64, x: &TokenMatrix) -> Result<TokenMatrix> {
    if x.dim() != w.dim {
        return Err(Error::Shape(format!(
            "tokens have {} columns, adapter expects {}",
            x.dim(),
            w.dim
        )));
    }
    let mut out = x.clone();
    if gate == 0.0 {
        return Ok(out);
    }
    let mut cache = RowCache::default();
    for r in 0..x.rows() {
        let y = w.forward_row(x.row(r), &mut cache);
        for (o, (&xi, yi)) in out.row_mut(r).iter_mut().zip(x.row(r).iter().zip(y)) {
            *o = gate * yi + (1.0 - gate) * xi;
        }
    }
    Ok(out)
}

/// Row-stochastic `L x (N+1)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged probability rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.data[l * self.cols..(l + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

fn unit_rows(m: &TokenMatrix) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut units = Vec::with_capacity(m.rows());
    let mut norms = Vec::with_capacity(m.rows());
    for (i, r) in m.iter_rows().enumerate() {
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateToken { row: i });
        }
        units.push(r.iter().map(|x| x / n).collect());
        norms.push(n);
    }
    Ok((units, norms))
}

/// Cosine similarity of every textual row against every visual row, `L x (N+1)`.
pub fn cosine_matrix(visual: &TokenMatrix, textual: &TokenMatrix) -> Result<Vec<Vec<f64>>> {
    if visual.dim() != textual.dim() {
        return Err(Error::Shape(format!(
            "visual dim {} != textual dim {}",
            visual.dim(),
            textual.dim()
        )));
    }
    let (vu, _) = unit_rows(visual)?;
    let (tu, _) = unit_rows(textual)?;
    Ok(tu
        .iter()
        .map(|t| vu.iter().map(|v| dot(t, v)).collect())
        .collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax_scaled(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&s| ((s - max) / temperature).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `P[l][n] = softmax_n(cos(t_l, v_n) / temperature)`.
pub fn similarity_probs(visual: &TokenMatrix, textual: &TokenMatrix, temperature: f64) -> Result<ProbMatrix> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::InvalidInput("temperature must be positive".into()));
    }
    let cos = cosine_matrix(visual, textual)?;
    ProbMatrix::from_rows(cos.iter().map(|r| softmax_scaled(r, temperature)).collect())
}

/// Mean negative log-probability of the labeled column per row, clamped at 1e-12.
pub fn ce_loss(p: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != p.rows() || p.rows() == 0 {
        return Err(Error::Shape(format!(
            "{} labels for {} probability rows",
            labels.len(),
            p.rows()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in p.iter_rows().zip(labels) {
        let py = *row.get(y).ok_or_else(|| {
            Error::InvalidInput(format!("label {y} out of range for {} columns", p.cols()))
        })?;
        total -= py.max(LOG_CLAMP).ln();
    }
    Ok(total / labels.len() as f64)
}
