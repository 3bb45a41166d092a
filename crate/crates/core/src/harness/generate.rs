//! Synthetic scenes and template instructions with recorded ground truth.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_placement_with, SuccessThresholds};
use super::{DatasetRecord, Level, Split};
use crate::geometry::{Aabb, Workspace};
use crate::parser::{tokenize, Lexicon};
use crate::placement::{normalize_and_sample, placement_field, PlacementParams};
use crate::relation::CanonicalRelation;
use crate::scene::{Scene, SceneObject, Tuple};
use crate::seed::{derived_rng, derived_seed};
use crate::{Error, Result};

const DEFAULT_OBJECTS: &str = include_str!("../../data/objects.json");
const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.json");

/// Reference text used for the workspace.
pub const TABLE_REFERENCE: &str = "table";

const SCENE_ATTEMPTS: usize = 50;
const RELATION_ATTEMPTS: usize = 20;
const PACKING_ATTEMPTS: usize = 500;

/// Object names, split into those seen in training and those held out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectVocabulary {
    pub seen: Vec<String>,
    pub unseen: Vec<String>,
}

impl Default for ObjectVocabulary {
    fn default() -> Self {
        Self::from_json(DEFAULT_OBJECTS).expect("shipped vocabulary is valid")
    }
}

impl ObjectVocabulary {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Self = serde_json::from_str(text)?;
        v.check_names()?;
        Ok(v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn all(&self) -> impl Iterator<Item = &str> {
        self.seen.iter().chain(&self.unseen).map(String::as_str)
    }

    fn check_names(&self) -> Result<()> {
        let mut distinct = BTreeSet::new();
        for name in self.all() {
            if name.is_empty() || name != name.trim() || name != name.to_lowercase() {
                return Err(Error::InvalidInput(format!("object name {name:?} must be lowercase and trimmed")));
            }
            if !distinct.insert(name) {
                return Err(Error::InvalidInput(format!("object name {name:?} is listed twice")));
            }
            if tokenize(name).iter().any(|w| w == TABLE_REFERENCE) {
                return Err(Error::InvalidInput(format!("object name {name:?} mentions the table")));
            }
        }
        Ok(())
    }

    /// Rejects names that share a word with any relation expression, since such a
    /// name could be cut short by the parser.
    pub fn validate(&self, lex: &Lexicon) -> Result<()> {
        self.check_names()?;
        let relation_words: BTreeSet<String> = lex.relations().iter().flat_map(|e| tokenize(&e.expr)).collect();
        for name in self.all() {
            if let Some(w) = tokenize(name).into_iter().find(|w| relation_words.contains(w)) {
                return Err(Error::InvalidInput(format!(
                    "object name {name:?} contains the relation word {w:?}"
                )));
            }
        }
        Ok(())
    }

    fn pool(&self, unseen: bool) -> &[String] {
        if unseen {
            &self.unseen
        } else {
            &self.seen
        }
    }
}

/// A relation expression a template may use, with its meaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRelation {
    pub expr: String,
    pub canonical: CanonicalRelation,
}

/// Relation expressions for seen and unseen instruction templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionTemplates {
    pub seen: Vec<TemplateRelation>,
    pub unseen: Vec<TemplateRelation>,
}

impl Default for InstructionTemplates {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }
}

impl InstructionTemplates {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?)
    }

    /// Each list covers every canonical relation and agrees with the lexicon.
    pub fn validate(&self, lex: &Lexicon) -> Result<()> {
        for (label, list) in [("seen", &self.seen), ("unseen", &self.unseen)] {
            for t in list {
                if lex.lookup(&t.expr) != Some(t.canonical) {
                    return Err(Error::InvalidInput(format!(
                        "{label} template expression {:?} does not parse to {}",
                        t.expr, t.canonical
                    )));
                }
            }
            if let Some(missing) = CanonicalRelation::all().find(|r| list.iter().all(|t| t.canonical != *r)) {
                return Err(Error::InvalidInput(format!("{label} templates never express {missing}")));
            }
        }
        Ok(())
    }

    fn pool(&self, unseen: bool) -> &[TemplateRelation] {
        if unseen {
            &self.unseen
        } else {
            &self.seen
        }
    }
}

/// `(expression, reference)` parts joined into an instruction.
///
/// Without a preamble the seen form `put it ...` is used.
pub fn render_instruction(parts: &[(&str, &str)], preamble: Option<&str>) -> String {
    let body: Vec<String> = parts.iter().map(|(e, r)| format!("{e} the {r}")).collect();
    format!("{} {}.", preamble.unwrap_or("put it"), body.join(" and "))
}

/// Instruction for the given references (`"table"` for the workspace), with
/// relations drawn from the seen or unseen templates. Returns the text and the
/// tuples and relations that generated it.
pub fn gen_instruction(
    references: &[&str],
    templates: &InstructionTemplates,
    lex: &Lexicon,
    unseen: bool,
    rng: &mut impl Rng,
) -> Result<(String, Vec<Tuple>, Vec<CanonicalRelation>)> {
    if references.is_empty() {
        return Err(Error::InvalidInput("an instruction needs at least one reference".into()));
    }
    let pool = templates.pool(unseen);
    let mut parts = Vec::with_capacity(references.len());
    let mut tuples = Vec::with_capacity(references.len());
    let mut relations = Vec::with_capacity(references.len());
    for &r in references {
        let is_table = r == TABLE_REFERENCE;
        let choices: Vec<&TemplateRelation> = pool.iter().filter(|t| t.canonical.is_region() == is_table).collect();
        let t = choices
            .choose(rng)
            .ok_or_else(|| Error::Generation("no template expression for this reference kind".into()))?;
        parts.push((t.expr.as_str(), r));
        tuples.push(Tuple::new(r, t.canonical.name())?);
        relations.push(t.canonical);
    }
    let preamble = if unseen {
        let pick = |list: &[String], what: &str, rng: &mut _| {
            list.choose(rng)
                .cloned()
                .ok_or_else(|| Error::Generation(format!("lexicon has no {what}")))
        };
        Some(format!(
            "{} {} {}",
            pick(lex.prefixes(), "prefixes", rng)?,
            pick(lex.verbs(), "verbs", rng)?,
            pick(lex.pronouns(), "pronouns", rng)?
        ))
    } else {
        None
    };
    Ok((render_instruction(&parts, preamble.as_deref()), tuples, relations))
}

/// Records per level within a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub table: usize,
    #[serde(rename = "1obj")]
    pub one_obj: usize,
    #[serde(rename = "2obj")]
    pub two_obj: usize,
}

impl LevelCounts {
    pub const ZERO: LevelCounts = LevelCounts { table: 0, one_obj: 0, two_obj: 0 };

    /// `total` split 9:9:22, rounding the two small levels.
    pub fn from_total(total: usize) -> Self {
        let small = (total * 9 + 20) / 40;
        let small = small.min(total / 2);
        Self { table: small, one_obj: small, two_obj: total - 2 * small }
    }

    pub fn total(&self) -> usize {
        self.table + self.one_obj + self.two_obj
    }

    fn levels(&self) -> Vec<Level> {
        let mut v = vec![Level::Table; self.table];
        v.extend(std::iter::repeat_n(Level::OneObject, self.one_obj));
        v.extend(std::iter::repeat_n(Level::TwoObjects, self.two_obj));
        v
    }
}

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub train: LevelCounts,
    pub test_seen: LevelCounts,
    pub test_unseen_obj: LevelCounts,
    pub test_unseen_inst: LevelCounts,
    pub seed: u64,
    pub objects_per_scene: usize,
    pub workspace: Workspace,
    pub min_object_size: f64,
    pub max_object_size: f64,
    pub placement: PlacementParams,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::scaled(2000, 400, 0)
    }
}

impl DatasetSpec {
    /// `train_total` training records and `test_total` per test subset, all at 9:9:22.
    pub fn scaled(train_total: usize, test_total: usize, seed: u64) -> Self {
        let test = LevelCounts::from_total(test_total);
        Self {
            train: LevelCounts::from_total(train_total),
            test_seen: test,
            test_unseen_obj: test,
            test_unseen_inst: test,
            seed,
            objects_per_scene: 5,
            workspace: Workspace::default(),
            min_object_size: 0.04,
            max_object_size: 0.12,
            placement: PlacementParams::default(),
        }
    }

    /// Keeps only the listed splits.
    pub fn only(mut self, splits: &[Split]) -> Self {
        for s in Split::ALL {
            if !splits.contains(&s) {
                *self.counts_mut(s) = LevelCounts::ZERO;
            }
        }
        self
    }

    pub fn counts(&self, split: Split) -> LevelCounts {
        match split {
            Split::Train => self.train,
            Split::TestSeen => self.test_seen,
            Split::TestUnseenObj => self.test_unseen_obj,
            Split::TestUnseenInst => self.test_unseen_inst,
        }
    }

    fn counts_mut(&mut self, split: Split) -> &mut LevelCounts {
        match split {
            Split::Train => &mut self.train,
            Split::TestSeen => &mut self.test_seen,
            Split::TestUnseenObj => &mut self.test_unseen_obj,
            Split::TestUnseenInst => &mut self.test_unseen_inst,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.placement.validate()?;
        if !(0.0 < self.min_object_size && self.min_object_size <= self.max_object_size) {
            return Err(Error::InvalidInput("object sizes must satisfy 0 < min <= max".into()));
        }
        if self.max_object_size > self.workspace.width.min(self.workspace.height) {
            return Err(Error::InvalidInput("objects larger than the workspace".into()));
        }
        if self.objects_per_scene < 2 {
            return Err(Error::InvalidInput("scenes need at least two objects".into()));
        }
        Ok(())
    }
}

/// Generates every split `spec` asks for. Ids run consecutively over the
/// splits in `train, test_seen, test_unseen_obj, test_unseen_inst` order.
pub fn gen_dataset(
    spec: &DatasetSpec,
    vocab: &ObjectVocabulary,
    templates: &InstructionTemplates,
    lex: &Lexicon,
) -> Result<Vec<DatasetRecord>> {
    spec.validate()?;
    vocab.validate(lex)?;
    templates.validate(lex)?;
    for (label, pool) in [("seen", &vocab.seen), ("unseen", &vocab.unseen)] {
        if pool.len() < spec.objects_per_scene {
            return Err(Error::Generation(format!(
                "{} {label} names cannot fill scenes of {} distinct objects",
                pool.len(),
                spec.objects_per_scene
            )));
        }
    }

    let mut jobs = Vec::new();
    for split in Split::ALL {
        let mut levels = spec.counts(split).levels();
        levels.shuffle(&mut derived_rng(spec.seed, "levels", split.name()));
        jobs.extend(levels.into_iter().map(|l| (split, l)));
    }
    jobs.into_par_iter()
        .enumerate()
        .map(|(id, (split, level))| gen_record(id as u64, split, level, spec, vocab, templates, lex))
        .collect()
}

fn gen_scene(id: u64, names: &[String], spec: &DatasetSpec, rng: &mut impl Rng) -> Option<Scene> {
    let (w, h) = (spec.workspace.width, spec.workspace.height);
    let picks = index::sample(rng, names.len(), spec.objects_per_scene);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(spec.objects_per_scene);
    for (k, name_idx) in picks.into_iter().enumerate() {
        let size = spec.min_object_size..=spec.max_object_size;
        let (bw, bh) = (rng.random_range(size.clone()), rng.random_range(size));
        let placed = (0..PACKING_ATTEMPTS).find_map(|_| {
            let x0 = rng.random_range(-0.5 * w..=0.5 * w - bw);
            let y0 = rng.random_range(-0.5 * h..=0.5 * h - bh);
            let b = Aabb::from_extents(x0, y0, x0 + bw, y0 + bh);
            objects.iter().all(|o| !o.aabb.overlaps(&b)).then_some(b)
        })?;
        objects.push(SceneObject {
            id: k as u32,
            name: names[name_idx].clone(),
            aabb: placed,
            crop_key: format!("s{id:05}_o{k}"),
            raster_bbox: None,
        });
    }
    Scene::new(spec.workspace, objects, format!("s{id:05}_ws")).ok()
}

fn gen_record(
    id: u64,
    split: Split,
    level: Level,
    spec: &DatasetSpec,
    vocab: &ObjectVocabulary,
    templates: &InstructionTemplates,
    lex: &Lexicon,
) -> Result<DatasetRecord> {
    let mut rng = derived_rng(spec.seed, "record", &id.to_string());
    let names = vocab.pool(split.uses_unseen_objects());
    let thresholds = SuccessThresholds::from(&spec.placement);

    for _ in 0..SCENE_ATTEMPTS {
        let Some(scene) = gen_scene(id, names, spec, &mut rng) else { continue };
        let n = scene.workspace_index();
        for _ in 0..RELATION_ATTEMPTS {
            let labels: Vec<usize> = match level {
                Level::Table => vec![n],
                Level::OneObject => vec![rng.random_range(0..n)],
                Level::TwoObjects => index::sample(&mut rng, n, 2).into_vec(),
            };
            let refs: Vec<&str> = labels
                .iter()
                .map(|&i| scene.objects.get(i).map_or(TABLE_REFERENCE, |o| o.name.as_str()))
                .collect();
            let (instruction, gt_tuples, gt_relations) =
                gen_instruction(&refs, templates, lex, split.uses_unseen_instructions(), &mut rng)?;
            let record = DatasetRecord {
                id,
                scene: scene.clone(),
                instruction,
                gt_tuples,
                gt_labels: labels,
                gt_relations,
                level,
                split,
            };
            let field = placement_field(&record.gt_pairs(), &record.scene, &spec.placement)?;
            let Ok(x) = normalize_and_sample(&field, derived_seed(spec.seed, "feasibility", id)) else {
                continue;
            };
            let verdict = evaluate_placement_with(x, &record, &thresholds);
            if !verdict.success {
                return Err(Error::Generation(format!(
                    "record {id}: the evaluator rejected an oracle sample at ({}, {}): {:?}",
                    x.x, x.y, verdict.reason
                )));
            }
            return Ok(record);
        }
    }
    Err(Error::Generation(format!(
        "record {id}: no feasible scene after {SCENE_ATTEMPTS} attempts"
    )))
}
