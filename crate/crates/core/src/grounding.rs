//! Resolving tuples against a scene: which token each tuple refers to and
//! which canonical relation it asks for.

use crate::adapter::{AdapterPair, ProbMatrix};
use crate::embeddings::{tokenize_scene, Embedding, Encoder};
use crate::parser::{tokenize, Lexicon, ParseSource, ParsedInstruction};
use crate::relation::{CanonicalRelation, ObjectDir, TableRegion};
use crate::scene::{GroundedPair, Scene, Tuple};
use crate::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// `n(l) = argmax_n P[l][n]` for every row.
pub fn ground_references(p: &ProbMatrix) -> Vec<usize> {
    p.iter_rows().map(argmax).collect()
}

fn names_table(reference: &str) -> bool {
    tokenize(reference).iter().any(|w| w == "table")
}

fn best_by_similarity(
    encoder: &dyn Encoder,
    anchor: &Embedding,
    candidates: impl Iterator<Item = (CanonicalRelation, String)>,
) -> Result<CanonicalRelation> {
    let mut best: Option<(CanonicalRelation, f64)> = None;
    for (rel, text) in candidates {
        let score = anchor.cosine(&encoder.embed_text(&text)?);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((rel, score));
        }
    }
    Ok(best.expect("candidate families are non-empty").0)
}

/// Canonical relation for a tuple.
///
/// A relation the lexicon knows is used as is. Otherwise each canonical relation
/// of the family implied by the reference (regions when it names the table,
/// directions otherwise) is substituted into the tuple, and the substitution
/// whose text embedding is closest to the original tuple's wins.
pub fn ground_relation(t: &Tuple, lex: &Lexicon, encoder: &dyn Encoder) -> Result<CanonicalRelation> {
    if let Some(r) = lex.lookup(t.rel_expr()) {
        return Ok(r);
    }
    let anchor = encoder.embed_text(&t.render())?;
    let family: Vec<CanonicalRelation> = if names_table(t.ref_expr()) {
        TableRegion::ALL.into_iter().map(CanonicalRelation::Region).collect()
    } else {
        ObjectDir::ALL.into_iter().map(CanonicalRelation::Direction).collect()
    };
    best_by_similarity(
        encoder,
        &anchor,
        family.into_iter().map(|r| (r, t.with_relation(r.name()).render())),
    )
}

/// Relation for a completion that had no tuple form: compares the raw text with
/// every canonical relation name.
pub fn ground_relation_raw(text: &str, encoder: &dyn Encoder) -> Result<CanonicalRelation> {
    let anchor = encoder.embed_text(text)?;
    best_by_similarity(
        encoder,
        &anchor,
        CanonicalRelation::all().map(|r| (r, r.name().to_string())),
    )
}

/// Full grounding of a parsed instruction against a scene.
pub fn ground_all(
    scene: &Scene,
    parsed: &ParsedInstruction,
    pair: &AdapterPair,
    encoder: &dyn Encoder,
    lex: &Lexicon,
) -> Result<Vec<GroundedPair>> {
    if parsed.tuples.is_empty() {
        return Err(Error::InvalidInput("nothing to ground: no tuples".into()));
    }
    let (visual, textual) = tokenize_scene(encoder, scene, &parsed.tuples)?;
    let probs = pair.probabilities(&visual, &textual)?;
    let refs = ground_references(&probs);
    let n = scene.workspace_index();

    parsed
        .tuples
        .iter()
        .enumerate()
        .map(|(l, t)| {
            let relation = match parsed.relations.get(l).copied().flatten() {
                Some(r) => r,
                None if parsed.source == ParseSource::LlmFallback => {
                    ground_relation_raw(t.rel_expr(), encoder)?
                }
                None => ground_relation(t, lex, encoder)?,
            };
            let object_index = if relation.is_region() {
                n
            } else if refs[l] < n {
                refs[l]
            } else if n == 0 {
                return Err(Error::InvalidInput(format!(
                    "relation {relation} needs an object but the scene has none"
                )));
            } else {
                argmax(&probs.row(l)[..n])
            };
            Ok(GroundedPair { object_index, relation })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::AdapterConfig;
    use crate::embeddings::{SyntheticConfig, SyntheticWorld};
    use crate::geometry::{Aabb, Workspace};
    use crate::parser::parse_instruction;
    use crate::scene::SceneObject;

    #[test]
    fn argmax_rules() {
        let p = ProbMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0 / 3.0; 3]]).unwrap();
        assert_eq!(ground_references(&p), vec![1, 2, 0]);
    }

    fn relation_world() -> SyntheticWorld {
        let mut w = SyntheticWorld::new(&["mug"], SyntheticConfig::default());
        for r in CanonicalRelation::all() {
            w.add_concept(r.name());
        }
        w.add_alias("rear right corner", "bottom right corner");
        w
    }

    #[test]
    fn lexicon_hit_skips_fallback() {
        let lex = Lexicon::default();
        // a store-less encoder that fails on any call proves no embedding happens
        struct Refuse;
        impl Encoder for Refuse {
            fn dim(&self) -> usize { 1 }
            fn embed_text(&self, _: &str) -> Result<Embedding> { Err(Error::ProviderUnavailable("refuse".into())) }
            fn embed_visual(&self, _: &Scene, _: usize) -> Result<Embedding> { Err(Error::ProviderUnavailable("refuse".into())) }
        }
        let t = Tuple::new("table", "bottom right corner").unwrap();
        assert_eq!(ground_relation(&t, &lex, &Refuse).unwrap().name(), "bottom right corner");
        for e in lex.relations() {
            let t = Tuple::new("mug", e.expr.as_str()).unwrap();
            assert_eq!(ground_relation(&t, &lex, &Refuse).unwrap(), e.canonical);
        }
    }

    #[test]
    fn substitution_fallback_finds_synonym() {
        let lex = Lexicon::default();
        let w = relation_world();
        let t = Tuple::new("table", "rear right corner").unwrap();
        let r = ground_relation(&t, &lex, &w).unwrap();
        assert_eq!(r.name(), "bottom right corner");
        // deterministic
        assert_eq!(ground_relation(&t, &lex, &w).unwrap(), r);
    }

    #[test]
    fn object_family_for_non_table_reference() {
        let lex = Lexicon::default();
        let mut w = relation_world();
        w.add_alias("rear side", "behind");
        let t = Tuple::new("mug", "on the rear side").unwrap();
        assert_eq!(ground_relation(&t, &lex, &w).unwrap().name(), "behind");
    }

    #[test]
    fn raw_completion_fallback() {
        let w = relation_world();
        let r = ground_relation_raw("well, probably the rear right corner I guess", &w).unwrap();
        assert_eq!(r.name(), "bottom right corner");
    }

    fn scene() -> Scene {
        let objects = ["mug", "plate", "bowl"]
            .iter()
            .enumerate()
            .map(|(i, n)| SceneObject {
                id: i as u32,
                name: n.to_string(),
                aabb: Aabb::from_extents(-0.3 + 0.25 * i as f64, 0.0, -0.25 + 0.25 * i as f64, 0.05),
                crop_key: format!("o{i}"),
                raster_bbox: None,
            })
            .collect();
        Scene::new(Workspace::default(), objects, "ws").unwrap()
    }

    #[test]
    fn table_reference_grounds_to_workspace_token() {
        let lex = Lexicon::default();
        let w = SyntheticWorld::new(&["mug", "plate", "bowl"], SyntheticConfig::default());
        let pair = AdapterPair::init(&AdapterConfig::default(), 0).unwrap();
        let parsed = parse_instruction("put it to the right part of the table.", &lex).unwrap();
        let g = ground_all(&scene(), &parsed, &pair, &w, &lex).unwrap();
        assert_eq!(g, vec![GroundedPair {
            object_index: 3,
            relation: CanonicalRelation::Region(TableRegion::RightPart)
        }]);
    }

    #[test]
    fn object_relation_never_anchors_on_workspace() {
        let lex = Lexicon::default();
        let w = SyntheticWorld::new(&["mug", "plate", "bowl"], SyntheticConfig::default());
        let pair = AdapterPair::init(&AdapterConfig::default(), 0).unwrap();
        let parsed = parse_instruction("put it behind the table lamp and left to the plate", &lex).unwrap();
        let s = scene();
        for g in ground_all(&s, &parsed, &pair, &w, &lex).unwrap() {
            g.validate(&s).unwrap();
        }
    }

    #[test]
    fn empty_tuples_rejected() {
        let lex = Lexicon::default();
        let w = SyntheticWorld::new(&["mug"], SyntheticConfig::default());
        let pair = AdapterPair::init(&AdapterConfig::default(), 0).unwrap();
        let parsed = ParsedInstruction { tuples: vec![], relations: vec![], source: ParseSource::Grammar };
        assert!(ground_all(&scene(), &parsed, &pair, &w, &lex).is_err());
    }
}
