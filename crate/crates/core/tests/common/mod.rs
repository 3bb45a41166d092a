#![allow(dead_code)]

use spatial_place::adapter::{AdapterPair, AdapterWeights};
use spatial_place::embeddings::TokenMatrix;
use spatial_place::geometry::{Aabb, Workspace};
use spatial_place::scene::{Scene, SceneObject};

/// The twelve tensors of a pair as f64, visual W1..b3 then textual W1..b3.
pub fn flat_params(pair: &AdapterPair) -> Vec<Vec<f64>> {
    let conv = |w: &AdapterWeights| -> Vec<Vec<f64>> {
        w.tensors().iter().map(|t| t.iter().map(|&x| f64::from(x)).collect()).collect()
    };
    let mut v = conv(&pair.visual);
    v.extend(conv(&pair.textual));
    v
}

fn mlp(p: &[Vec<f64>], dim: usize, hidden: usize, x: &[f64]) -> Vec<f64> {
    let layer = |w: &[f64], b: &[f64], x: &[f64], rows: usize, relu: bool| -> Vec<f64> {
        (0..rows)
            .map(|i| {
                let mut s = b[i];
                for (j, xj) in x.iter().enumerate() {
                    s += w[i * x.len() + j] * xj;
                }
                if relu {
                    s.max(0.0)
                } else {
                    s
                }
            })
            .collect()
    };
    let h1 = layer(&p[0], &p[1], x, hidden, true);
    let h2 = layer(&p[2], &p[3], &h1, hidden, true);
    layer(&p[4], &p[5], &h2, dim, false)
}

fn mix(p: &[Vec<f64>], gate: f64, dim: usize, hidden: usize, x: &[f64]) -> Vec<f64> {
    let a = mlp(p, dim, hidden, x);
    x.iter().zip(&a).map(|(xi, ai)| gate * ai + (1.0 - gate) * xi).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Mean cross-entropy of the labeled tokens, computed from scratch.
#[allow(clippy::too_many_arguments)]
pub fn oracle_loss(
    params: &[Vec<f64>],
    dim: usize,
    hidden: usize,
    alpha: f64,
    beta: f64,
    tau: f64,
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    labels: &[usize],
) -> f64 {
    let vs: Vec<Vec<f64>> = visual.iter_rows().map(|r| unit(mix(&params[..6], alpha, dim, hidden, r))).collect();
    let ts: Vec<Vec<f64>> = textual.iter_rows().map(|r| unit(mix(&params[6..], beta, dim, hidden, r))).collect();
    let mut total = 0.0;
    for (t, &y) in ts.iter().zip(labels) {
        let logits: Vec<f64> = vs.iter().map(|v| v.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / tau).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        total += lse - logits[y];
    }
    total / labels.len() as f64
}

pub fn object(id: u32, name: &str, b: [f64; 4]) -> SceneObject {
    SceneObject {
        id,
        name: name.into(),
        aabb: Aabb::from_extents(b[0], b[1], b[2], b[3]),
        crop_key: format!("o{id}"),
        raster_bbox: None,
    }
}

pub fn scene(objects: Vec<SceneObject>) -> Scene {
    Scene::new(Workspace::default(), objects, "ws").unwrap()
}

/// Relative error with a small floor so that two vanishing values compare equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
