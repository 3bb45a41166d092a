//! Frozen-encoder tokens: unit-norm text and image embeddings behind a
//! provider trait, plus stores for precomputed tokens.

mod http;
mod store;
mod synthetic;

pub use http::{HttpEncoder, ENCODER_URL_ENV};
pub use store::{EmbeddingStore, StoreEncoder};
pub use synthetic::{SyntheticConfig, SyntheticWorld, WORKSPACE_CONCEPT};

use crate::scene::{Scene, Tuple};
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 512;

/// A unit-norm encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// Normalizes `v`; fails on zero or non-finite input.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Embedding(v.iter().map(|x| (x / norm) as f32).collect()))
    }

    /// Wraps stored components, re-normalizing when they drift from unit norm.
    pub fn from_f32(v: Vec<f32>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("embedding has non-finite components".into()));
        }
        let norm = v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() <= 1e-6 {
            Ok(Embedding(v))
        } else {
            Self::normalized(&v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>())
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&x| f64::from(x)).collect()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        dot / (self.norm() * other.norm())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenRole {
    Visual,
    Textual,
}

/// Row-major stack of tokens, `rows x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    pub role: TokenRole,
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl TokenMatrix {
    pub fn from_embeddings(role: TokenRole, rows: &[Embedding]) -> Result<Self> {
        let dim = rows.first().map_or(0, Embedding::dim);
        if let Some(bad) = rows.iter().find(|e| e.dim() != dim) {
            return Err(Error::Shape(format!(
                "token dimension {} differs from {dim}",
                bad.dim()
            )));
        }
        let data = rows.iter().flat_map(|e| e.to_f64()).collect();
        Ok(Self {
            role,
            rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn from_rows(role: TokenRole, rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Shape(format!(
                "{} values cannot form a {rows}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Self { role, rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keeps only the given rows, in the given order.
    pub fn select_rows(&self, order: &[usize]) -> TokenMatrix {
        let data = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        TokenMatrix {
            role: self.role,
            rows: order.len(),
            dim: self.dim,
            data,
        }
    }
}

/// A frozen image/text encoder.
pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed_text(&self, text: &str) -> Result<Embedding>;

    /// Token `index` of `scene`: an object crop for `index < N`, the workspace image for `N`.
    fn embed_visual(&self, scene: &Scene, index: usize) -> Result<Embedding>;
}

impl<E: Encoder + ?Sized> Encoder for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_text(&self, text: &str) -> Result<Embedding> {
        (**self).embed_text(text)
    }
    fn embed_visual(&self, scene: &Scene, index: usize) -> Result<Embedding> {
        (**self).embed_visual(scene, index)
    }
}

impl<E: Encoder + ?Sized> Encoder for Box<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_text(&self, text: &str) -> Result<Embedding> {
        (**self).embed_text(text)
    }
    fn embed_visual(&self, scene: &Scene, index: usize) -> Result<Embedding> {
        (**self).embed_visual(scene, index)
    }
}

pub(crate) fn check_visual_index(scene: &Scene, index: usize) -> Result<()> {
    if index > scene.workspace_index() {
        return Err(Error::InvalidInput(format!(
            "visual token {index} out of range for a scene with {} objects",
            scene.len()
        )));
    }
    Ok(())
}

/// Visual tokens (objects in id order, workspace last) and one textual token per tuple.
pub fn tokenize_scene(
    encoder: &dyn Encoder,
    scene: &Scene,
    tuples: &[Tuple],
) -> Result<(TokenMatrix, TokenMatrix)> {
    if tuples.is_empty() {
        return Err(Error::InvalidInput("at least one tuple is required".into()));
    }
    let visual = (0..scene.token_count())
        .map(|i| encoder.embed_visual(scene, i))
        .collect::<Result<Vec<_>>>()?;
    let text = tuples
        .iter()
        .map(|t| encoder.embed_text(&t.render()))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        TokenMatrix::from_embeddings(TokenRole::Visual, &visual)?,
        TokenMatrix::from_embeddings(TokenRole::Textual, &text)?,
    ))
}
