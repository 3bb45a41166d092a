//! Analytic gradients of the grounding loss with respect to both adapters.

#![allow(clippy::needless_range_loop)]

use super::{dot, AdapterPair, AdapterWeights, RowCache};
use crate::embeddings::TokenMatrix;
use crate::{Error, Result};

/// Gradient buffers shaped like the two adapters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub visual: GradTensors,
    pub textual: GradTensors,
}

/// `f64` gradients for W1, b1, W2, b2, W3, b3.
#[derive(Debug, Clone, PartialEq)]
pub struct GradTensors {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

impl GradTensors {
    fn zeros_like(w: &AdapterWeights) -> Self {
        Self {
            w1: vec![0.0; w.w1.len()],
            b1: vec![0.0; w.b1.len()],
            w2: vec![0.0; w.w2.len()],
            b2: vec![0.0; w.b2.len()],
            w3: vec![0.0; w.w3.len()],
            b3: vec![0.0; w.b3.len()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }
}

impl Gradients {
    pub fn zeros_like(pair: &AdapterPair) -> Self {
        Self {
            visual: GradTensors::zeros_like(&pair.visual),
            textual: GradTensors::zeros_like(&pair.textual),
        }
    }

    /// All twelve tensors: visual W1..b3 then textual W1..b3.
    pub fn tensors(&self) -> [&[f64]; 12] {
        let [a, b, c, d, e, f] = self.visual.tensors();
        let [g, h, i, j, k, l] = self.textual.tensors();
        [a, b, c, d, e, f, g, h, i, j, k, l]
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for t in self
            .visual
            .tensors_mut()
            .into_iter()
            .chain(self.textual.tensors_mut())
        {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub(crate) fn clear(&mut self) {
        self.scale(0.0);
    }
}

/// Forward state of one adapter over a token matrix.
struct AdaptedRows {
    caches: Vec<RowCache>,
    units: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

fn adapt_rows(w: &AdapterWeights, gate: f64, x: &TokenMatrix) -> Result<AdaptedRows> {
    if x.dim() != w.dim {
        return Err(Error::Shape(format!(
            "tokens have {} columns, adapter expects {}",
            x.dim(),
            w.dim
        )));
    }
    let mut caches = Vec::with_capacity(x.rows());
    let mut units = Vec::with_capacity(x.rows());
    let mut norms = Vec::with_capacity(x.rows());
    for (r, xi) in x.iter_rows().enumerate() {
        let mut cache = RowCache::default();
        let out: Vec<f64> = if gate == 0.0 {
            xi.to_vec()
        } else {
            let y = w.forward_row(xi, &mut cache);
            y.iter().zip(xi).map(|(a, b)| gate * a + (1.0 - gate) * b).collect()
        };
        let n = dot(&out, &out).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateToken { row: r });
        }
        units.push(out.iter().map(|v| v / n).collect());
        norms.push(n);
        caches.push(cache);
    }
    Ok(AdaptedRows { caches, units, norms })
}

/// Backpropagates `d_out` (gradient w.r.t. the adapted row) into `g`.
fn accumulate_row(
    w: &AdapterWeights,
    gate: f64,
    x: &[f64],
    cache: &RowCache,
    d_out: &[f64],
    g: &mut GradTensors,
) {
    let (d, h) = (w.dim, w.hidden);
    // out = gate * y + (1 - gate) * x, and x is frozen
    let dy: Vec<f64> = d_out.iter().map(|v| gate * v).collect();

    let mut da2 = vec![0.0; h];
    for k in 0..d {
        let dyk = dy[k];
        g.b3[k] += dyk;
        let row = &w.w3[k * h..(k + 1) * h];
        let grow = &mut g.w3[k * h..(k + 1) * h];
        for j in 0..h {
            grow[j] += dyk * cache.a2[j];
            da2[j] += f64::from(row[j]) * dyk;
        }
    }
    let dz2: Vec<f64> = da2
        .iter()
        .zip(&cache.z2)
        .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
        .collect();

    let mut da1 = vec![0.0; h];
    for i in 0..h {
        let dzi = dz2[i];
        if dzi == 0.0 {
            continue;
        }
        g.b2[i] += dzi;
        let row = &w.w2[i * h..(i + 1) * h];
        let grow = &mut g.w2[i * h..(i + 1) * h];
        for j in 0..h {
            grow[j] += dzi * cache.a1[j];
            da1[j] += f64::from(row[j]) * dzi;
        }
    }
    for i in 0..h {
        if cache.z1[i] <= 0.0 {
            continue;
        }
        let dzi = da1[i];
        g.b1[i] += dzi;
        let grow = &mut g.w1[i * d..(i + 1) * d];
        for (gj, xj) in grow.iter_mut().zip(x) {
            *gj += dzi * xj;
        }
    }
}

/// Adds the gradient of one sample's loss into `grads` and returns that loss.
///
/// The loss is `mean_l [logsumexp_n(s_ln / tau) - s_{l,y_l} / tau]`, i.e. the
/// cross entropy of the softmax probabilities without the log clamp.
pub(crate) fn accumulate(
    pair: &AdapterPair,
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    labels: &[usize],
    grads: &mut Gradients,
) -> Result<f64> {
    if labels.len() != textual.rows() || labels.is_empty() {
        return Err(Error::Shape(format!(
            "{} labels for {} textual tokens",
            labels.len(),
            textual.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= visual.rows()) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {} visual tokens",
            visual.rows()
        )));
    }
    let v = adapt_rows(&pair.visual, pair.alpha, visual)?;
    let t = adapt_rows(&pair.textual, pair.beta, textual)?;
    let tau = pair.temperature;
    let n_vis = visual.rows();
    let n_txt = textual.rows();
    let inv_l = 1.0 / n_txt as f64;

    let mut loss = 0.0;
    // dS[l][n]
    let mut d_sim = vec![vec![0.0; n_vis]; n_txt];
    for l in 0..n_txt {
        let logits: Vec<f64> = v.units.iter().map(|vu| dot(&t.units[l], vu) / tau).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|s| (s - max).exp()).sum();
        let lse = max + z.ln();
        loss += (lse - logits[labels[l]]) * inv_l;
        for n in 0..n_vis {
            let p = (logits[n] - lse).exp();
            let y = if n == labels[l] { 1.0 } else { 0.0 };
            d_sim[l][n] = (p - y) * inv_l / tau;
        }
    }

    // through the cosine: d out = (d unit - unit (unit . d unit)) / |out|
    let project = |unit: &[f64], du: Vec<f64>, norm: f64| -> Vec<f64> {
        let c = dot(unit, &du);
        du.iter().zip(unit).map(|(d, u)| (d - u * c) / norm).collect()
    };

    if pair.beta != 0.0 {
        for l in 0..n_txt {
            let mut du = vec![0.0; textual.dim()];
            for n in 0..n_vis {
                let s = d_sim[l][n];
                du.iter_mut().zip(&v.units[n]).for_each(|(a, b)| *a += s * b);
            }
            let d_out = project(&t.units[l], du, t.norms[l]);
            accumulate_row(&pair.textual, pair.beta, textual.row(l), &t.caches[l], &d_out, &mut grads.textual);
        }
    }
    if pair.alpha != 0.0 {
        for n in 0..n_vis {
            let mut du = vec![0.0; visual.dim()];
            for l in 0..n_txt {
                let s = d_sim[l][n];
                du.iter_mut().zip(&t.units[l]).for_each(|(a, b)| *a += s * b);
            }
            let d_out = project(&v.units[n], du, v.norms[n]);
            accumulate_row(&pair.visual, pair.alpha, visual.row(n), &v.caches[n], &d_out, &mut grads.visual);
        }
    }
    Ok(loss)
}

/// Loss and exact gradients for one sample.
pub fn backward(
    pair: &AdapterPair,
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    let mut g = Gradients::zeros_like(pair);
    let loss = accumulate(pair, visual, textual, labels, &mut g)?;
    Ok((loss, g))
}

/// Loss only, sharing the forward path of [`backward`].
pub(crate) fn sample_loss(
    pair: &AdapterPair,
    visual: &TokenMatrix,
    textual: &TokenMatrix,
    labels: &[usize],
) -> Result<f64> {
    let probs = pair.probabilities(visual, textual)?;
    let mut total = 0.0;
    for (row, &y) in probs.iter_rows().zip(labels) {
        total -= row[y].ln();
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::AdapterConfig;
    use crate::embeddings::TokenRole;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tokens(role: TokenRole, rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> TokenMatrix {
        let data = (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        TokenMatrix::from_rows(role, rows, dim, data).unwrap()
    }

    #[test]
    fn zero_gates_give_zero_gradients() {
        let cfg = AdapterConfig { dim: 16, hidden: 4, alpha: 0.0, beta: 0.0, ..Default::default() };
        let pair = AdapterPair::init(&cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = tokens(TokenRole::Visual, 4, 16, &mut rng);
        let t = tokens(TokenRole::Textual, 2, 16, &mut rng);
        let (_, g) = backward(&pair, &v, &t, &[0, 3]).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn loss_matches_probability_route() {
        let cfg = AdapterConfig { dim: 16, hidden: 6, ..Default::default() };
        let pair = AdapterPair::init(&cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = tokens(TokenRole::Visual, 5, 16, &mut rng);
        let t = tokens(TokenRole::Textual, 2, 16, &mut rng);
        let (loss, _) = backward(&pair, &v, &t, &[1, 4]).unwrap();
        let direct = sample_loss(&pair, &v, &t, &[1, 4]).unwrap();
        assert!((loss - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn label_checks() {
        let cfg = AdapterConfig { dim: 8, hidden: 2, ..Default::default() };
        let pair = AdapterPair::init(&cfg, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = tokens(TokenRole::Visual, 3, 8, &mut rng);
        let t = tokens(TokenRole::Textual, 1, 8, &mut rng);
        assert!(backward(&pair, &v, &t, &[3]).is_err());
        assert!(backward(&pair, &v, &t, &[0, 1]).is_err());
    }
}
