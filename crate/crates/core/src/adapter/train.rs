//! Supervised training of the adapter pair on reference labels.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::{accumulate, Gradients};
use super::AdapterPair;
use crate::embeddings::{tokenize_scene, Encoder, TokenMatrix};
use crate::scene::{Scene, Tuple};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-4,
            steps: 20_000,
            batch_size: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// A scene, its parsed tuples and the ground-truth token index per tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub scene: Scene,
    pub tuples: Vec<Tuple>,
    pub labels: Vec<usize>,
}

/// Encoder outputs for a sample, computed once since the encoder is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub visual: TokenMatrix,
    pub textual: TokenMatrix,
    pub labels: Vec<usize>,
}

pub fn prepare_samples(encoder: &dyn Encoder, samples: &[TrainSample]) -> Result<Vec<PreparedSample>> {
    samples
        .iter()
        .map(|s| {
            if s.labels.len() != s.tuples.len() {
                return Err(Error::Shape(format!(
                    "{} labels for {} tuples",
                    s.labels.len(),
                    s.tuples.len()
                )));
            }
            if let Some(&bad) = s.labels.iter().find(|&&y| y > s.scene.workspace_index()) {
                return Err(Error::InvalidInput(format!("label {bad} out of range")));
            }
            let (visual, textual) = tokenize_scene(encoder, &s.scene, &s.tuples)?;
            Ok(PreparedSample {
                visual,
                textual,
                labels: s.labels.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub pair: AdapterPair,
    /// Mean batch loss before each update.
    pub losses: Vec<f64>,
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(pair: &mut AdapterPair, grads: &Gradients, cfg: &TrainConfig, adam: &mut AdamState) {
    let lr = cfg.learning_rate;
    let grad_tensors = grads.tensors();
    let [a, b, c, d, e, f] = pair.visual.tensors_mut();
    let [g, h, i, j, k, l] = pair.textual.tensors_mut();
    let params: [&mut [f32]; 12] = [a, b, c, d, e, f, g, h, i, j, k, l];
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, gr) in params.into_iter().zip(grad_tensors) {
                for (w, &gw) in p.iter_mut().zip(gr) {
                    *w = (f64::from(*w) - lr * gw) as f32;
                }
            }
        }
        Optimizer::Adam => {
            adam.t += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(adam.t);
            let bc2 = 1.0 - ADAM_BETA2.powi(adam.t);
            for (idx, (p, gr)) in params.into_iter().zip(grad_tensors).enumerate() {
                let m = &mut adam.m[idx];
                let v = &mut adam.v[idx];
                for (((w, &gw), mi), vi) in p.iter_mut().zip(gr).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gw;
                    *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gw * gw;
                    let step = lr * (*mi / bc1) / ((*vi / bc2).sqrt() + ADAM_EPS);
                    *w = (f64::from(*w) - step) as f32;
                }
            }
        }
    }
}

/// Trains on precomputed tokens. Sample order is a seeded reshuffle per epoch.
pub fn train_prepared(
    pair: &AdapterPair,
    data: &[PreparedSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    pair.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let mut pair = pair.clone();
    let mut grads = Gradients::zeros_like(&pair);
    let mut adam = AdamState {
        m: grads.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
        v: grads.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
        t: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.steps);

    for _ in 0..cfg.steps {
        grads.clear();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let s = &data[order[cursor]];
            cursor += 1;
            batch_loss += accumulate(&pair, &s.visual, &s.textual, &s.labels, &mut grads)?;
        }
        let inv = 1.0 / cfg.batch_size as f64;
        grads.scale(inv);
        losses.push(batch_loss * inv);
        apply_update(&mut pair, &grads, cfg, &mut adam);
    }
    Ok(TrainOutcome { pair, losses })
}

/// Encodes `samples` with the frozen encoder, then trains.
pub fn train(
    pair: &AdapterPair,
    samples: &[TrainSample],
    cfg: &TrainConfig,
    encoder: &dyn Encoder,
) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let data = prepare_samples(encoder, samples)?;
    train_prepared(pair, &data, cfg)
}

/// Mean loss over prepared samples under `pair`.
pub fn mean_loss(pair: &AdapterPair, data: &[PreparedSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        total += super::backward::sample_loss(pair, &s.visual, &s.textual, &s.labels)?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Fraction of tuples whose argmax token equals the label.
pub fn grounding_accuracy(pair: &AdapterPair, data: &[PreparedSample]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for s in data {
        let p = pair.probabilities(&s.visual, &s.textual)?;
        for (row, &y) in p.iter_rows().zip(&s.labels) {
            hits += usize::from(crate::grounding::argmax(row) == y);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}
