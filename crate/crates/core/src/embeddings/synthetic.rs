//! A deterministic stand-in for a pretrained image/text encoder.
//!
//! Every concept name owns a random unit vector. Text maps to the concept
//! sharing the most content words with it; images map to the concept of the
//! object's name pushed through a fixed random orthogonal matrix. That rotation
//! makes raw text/image similarities uninformative, so grounding only works
//! once the adapters have learned to undo it.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_visual_index, Embedding, Encoder, DEFAULT_DIM};
use crate::scene::Scene;
use crate::seed::derived_rng;
use crate::Result;

/// Concept used for the whole-workspace token.
pub const WORKSPACE_CONCEPT: &str = "table";

const STOPWORDS: [&str; 11] = ["the", "a", "an", "of", "to", "with", "and", "on", "in", "at", "it"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub dim: usize,
    /// Expected norm of the additive noise before re-normalization.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Use the identity instead of a random rotation for the visual side.
    pub identity_transform: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            noise_sigma: 0.05,
            seed: 0,
            identity_transform: false,
        }
    }
}

#[derive(Debug, Clone)]
struct Concept {
    name: String,
    words: BTreeSet<String>,
    vector: Vec<f64>,
    visual: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    cfg: SyntheticConfig,
    concepts: Vec<Concept>,
    transform: DMatrix<f64>,
}

fn content_words(text: &str) -> BTreeSet<String> {
    crate::parser::tokenize(text)
        .into_iter()
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}


fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

impl SyntheticWorld {
    /// Builds a world over `names`; the workspace concept is always included.
    pub fn new<S: AsRef<str>>(names: &[S], cfg: SyntheticConfig) -> Self {
        let transform = if cfg.identity_transform {
            DMatrix::identity(cfg.dim, cfg.dim)
        } else {
            let mut rng = derived_rng(cfg.seed, "transform", "");
            let g = DMatrix::from_fn(cfg.dim, cfg.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            g.qr().q()
        };
        let mut world = SyntheticWorld {
            cfg,
            concepts: Vec::new(),
            transform,
        };
        world.add_concept(WORKSPACE_CONCEPT);
        for n in names {
            world.add_concept(n.as_ref());
        }
        world
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    pub fn visual_transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    fn push(&mut self, name: &str, vector: Vec<f64>) {
        if self.concepts.iter().any(|c| c.name == name) {
            return;
        }
        let visual = self.rotate(&vector);
        self.concepts.push(Concept {
            name: name.to_string(),
            words: content_words(name),
            vector,
            visual,
        });
    }

    /// Registers a concept with its own random vector; existing names are left untouched.
    pub fn add_concept(&mut self, name: &str) {
        let v = unit(gaussian(&mut derived_rng(self.cfg.seed, "concept", name), self.cfg.dim, 1.0));
        self.push(name, v);
    }

    /// Registers `alias` as a synonym sharing `target`'s vector.
    pub fn add_alias(&mut self, alias: &str, target: &str) {
        self.add_concept(target);
        let v = self.concept_vector(target).expect("target registered above").to_vec();
        self.push(alias, v);
    }

    pub fn concept_names(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|c| c.name.as_str())
    }

    pub fn concept_vector(&self, name: &str) -> Option<&[f64]> {
        self.concepts
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.vector.as_slice())
    }

    /// Concept with the largest content-word overlap; ties go to the shorter name, then the
    /// lexicographically smaller one.
    pub fn nearest_concept(&self, text: &str) -> Option<&str> {
        self.nearest(text).map(|c| c.name.as_str())
    }

    fn nearest(&self, text: &str) -> Option<&Concept> {
        let words = content_words(text);
        self.concepts
            .iter()
            .map(|c| (c.words.intersection(&words).count(), c))
            .filter(|(k, _)| *k > 0)
            .max_by(|(ka, a), (kb, b)| {
                ka.cmp(kb)
                    .then(b.words.len().cmp(&a.words.len()))
                    .then(b.name.cmp(&a.name))
            })
            .map(|(_, c)| c)
    }

    fn rotate(&self, v: &[f64]) -> Vec<f64> {
        let out = &self.transform * nalgebra::DVector::from_column_slice(v);
        out.as_slice().to_vec()
    }

    fn perturb(&self, base: &[f64], tag: &str, key: &str) -> Result<Embedding> {
        let scale = self.cfg.noise_sigma / (self.cfg.dim as f64).sqrt();
        let noise = gaussian(&mut derived_rng(self.cfg.seed, tag, key), self.cfg.dim, scale);
        let v: Vec<f64> = base.iter().zip(&noise).map(|(a, b)| a + b).collect();
        Embedding::normalized(&v)
    }

    fn unknown(&self, tag: &str, key: &str) -> Vec<f64> {
        unit(gaussian(&mut derived_rng(self.cfg.seed, tag, key), self.cfg.dim, 1.0))
    }
}

impl Encoder for SyntheticWorld {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        if text.trim().is_empty() {
            return Err(crate::Error::InvalidInput("cannot embed empty text".into()));
        }
        let base = match self.nearest(text) {
            Some(c) => c.vector.clone(),
            None => self.unknown("unknown-text", text),
        };
        self.perturb(&base, "text", text)
    }

    fn embed_visual(&self, scene: &Scene, index: usize) -> Result<Embedding> {
        check_visual_index(scene, index)?;
        let (name, key) = match scene.objects.get(index) {
            Some(o) => (o.name.as_str(), o.crop_key.as_str()),
            None => (WORKSPACE_CONCEPT, scene.workspace_crop_key.as_str()),
        };
        let base = match self.nearest(name) {
            Some(c) => c.visual.clone(),
            None => self.rotate(&self.unknown("unknown-object", name)),
        };
        self.perturb(&base, "visual", key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Workspace};
    use crate::scene::SceneObject;

    fn small(cfg: SyntheticConfig) -> SyntheticWorld {
        SyntheticWorld::new(&["red mug", "plate", "black shoe with orange and black stripes"], cfg)
    }

    fn two_mugs() -> Scene {
        let o = |id: u32, x: f64| SceneObject {
            id,
            name: "red mug".into(),
            aabb: Aabb::from_extents(x, 0.0, x + 0.05, 0.05),
            crop_key: format!("mug{id}"),
            raster_bbox: None,
        };
        Scene::new(Workspace::default(), vec![o(0, -0.2), o(1, 0.2)], "ws").unwrap()
    }

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    #[test]
    fn transform_is_orthogonal() {
        let w = small(SyntheticConfig { dim: 64, ..Default::default() });
        let q = w.visual_transform();
        let err = (q.transpose() * q - DMatrix::<f64>::identity(64, 64)).abs().max();
        assert!(err < 1e-6, "{err}");
        let w = small(SyntheticConfig::default());
        let q = w.visual_transform();
        let err = (q.transpose() * q - DMatrix::<f64>::identity(512, 512)).abs().max();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn text_of_concept_name_stays_close() {
        let w = small(SyntheticConfig::default());
        for name in ["red mug", "plate", "table"] {
            let e = w.embed_text(name).unwrap();
            assert!(cos(&e.to_f64(), w.concept_vector(name).unwrap()) >= 0.99);
            assert!((e.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tuple_text_resolves_to_its_reference() {
        let w = small(SyntheticConfig::default());
        assert_eq!(w.nearest_concept("left red mug"), Some("red mug"));
        assert_eq!(w.nearest_concept("right part table"), Some("table"));
        assert_eq!(
            w.nearest_concept("behind black shoe with orange and black stripes"),
            Some("black shoe with orange and black stripes")
        );
        assert_eq!(w.nearest_concept("left"), None);
    }

    #[test]
    fn zero_noise_visual_is_rotated_concept() {
        let w = small(SyntheticConfig { noise_sigma: 0.0, ..Default::default() });
        let s = two_mugs();
        let v = w.embed_visual(&s, 0).unwrap();
        let target = w.rotate(w.concept_vector("red mug").unwrap());
        assert!((cos(&v.to_f64(), &target) - 1.0).abs() < 1e-6);
        let ws = w.embed_visual(&s, 2).unwrap();
        let target = w.rotate(w.concept_vector("table").unwrap());
        assert!((cos(&ws.to_f64(), &target) - 1.0).abs() < 1e-6);
        assert!(w.embed_visual(&s, 3).is_err());
    }

    #[test]
    fn identity_world_aligns_modalities() {
        let w = small(SyntheticConfig {
            noise_sigma: 0.0,
            identity_transform: true,
            ..Default::default()
        });
        let v = w.embed_visual(&two_mugs(), 1).unwrap();
        let t = w.embed_text("red mug").unwrap();
        assert_eq!(v, t);
    }

    #[test]
    fn same_concept_instances_stay_similar() {
        // Noise has expected norm sigma, so the cosine between two instances
        // concentrates near 1 / (1 + sigma^2) = 0.9975 for sigma = 0.05.
        let w = small(SyntheticConfig::default());
        let s = two_mugs();
        let a = w.embed_visual(&s, 0).unwrap();
        let b = w.embed_visual(&s, 1).unwrap();
        let c = a.cosine(&b);
        assert!(c >= 0.9, "{c}");
        assert!((c - 1.0 / (1.0 + 0.05f64.powi(2))).abs() < 0.01, "{c}");
    }

    #[test]
    fn deterministic_under_seed() {
        let a = small(SyntheticConfig::default());
        let b = small(SyntheticConfig::default());
        let bits = |e: Embedding| e.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.embed_text("left red mug").unwrap()), bits(b.embed_text("left red mug").unwrap()));
        assert_eq!(
            bits(a.embed_visual(&two_mugs(), 0).unwrap()),
            bits(b.embed_visual(&two_mugs(), 0).unwrap())
        );
        let c = small(SyntheticConfig { seed: 9, ..Default::default() });
        assert_ne!(a.embed_text("plate").unwrap(), c.embed_text("plate").unwrap());
    }

    #[test]
    fn rotation_hides_the_match() {
        let w = small(SyntheticConfig::default());
        let v = w.embed_visual(&two_mugs(), 0).unwrap();
        let t = w.embed_text("red mug").unwrap();
        assert!(v.cosine(&t).abs() < 0.25);
    }

    #[test]
    fn aliases_share_vectors() {
        let mut w = small(SyntheticConfig::default());
        w.add_alias("rear right corner", "bottom right corner");
        assert_eq!(
            w.concept_vector("rear right corner").unwrap(),
            w.concept_vector("bottom right corner").unwrap()
        );
    }
}
