//! Whole-dataset evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_placement_with, EvalOutcome, FailureReason, SuccessThresholds};
use super::{DatasetRecord, Level};
use crate::geometry::Vec2;
use crate::pipeline::ModelAssets;
use crate::placement::{normalize_and_sample, placement_field, PlacementParams};
use crate::scene::GroundedPair;
use crate::seed::derived_seed;

/// Where groundings come from.
#[derive(Clone, Copy)]
pub enum Pipeline<'a> {
    /// Ground-truth tuples and groundings go straight to the placement stage.
    Oracle,
    Model(ModelAssets<'a>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub seed: u64,
    pub placement: PlacementParams,
}

/// Result for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: u64,
    pub level: Level,
    pub success: bool,
    pub reason: Option<FailureReason>,
    pub point: Option<Vec2>,
    /// Tuples whose reference matched the label, out of `labels_checked`.
    pub correct_references: usize,
    pub labels_checked: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub count: usize,
    pub successes: usize,
    pub success_rate: f64,
}

impl LevelStats {
    fn finish(mut self) -> Self {
        self.success_rate = if self.count == 0 { 0.0 } else { self.successes as f64 / self.count as f64 };
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelsReport {
    pub table: LevelStats,
    #[serde(rename = "1obj")]
    pub one_obj: LevelStats,
    #[serde(rename = "2obj")]
    pub two_obj: LevelStats,
}

impl LevelsReport {
    fn get_mut(&mut self, l: Level) -> &mut LevelStats {
        match l {
            Level::Table => &mut self.table,
            Level::OneObject => &mut self.one_obj,
            Level::TwoObjects => &mut self.two_obj,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub wrong_region: usize,
    pub too_close: usize,
    pub too_far: usize,
    pub wrong_direction: usize,
    pub collision: usize,
    pub grounding_error: usize,
    pub parse_error: usize,
}

impl FailureCounts {
    fn bump(&mut self, r: FailureReason) {
        let slot = match r {
            FailureReason::WrongRegion => &mut self.wrong_region,
            FailureReason::TooClose => &mut self.too_close,
            FailureReason::TooFar => &mut self.too_far,
            FailureReason::WrongDirection => &mut self.wrong_direction,
            FailureReason::Collision => &mut self.collision,
            FailureReason::GroundingError => &mut self.grounding_error,
            FailureReason::ParseError => &mut self.parse_error,
        };
        *slot += 1;
    }

    pub fn total(&self) -> usize {
        self.wrong_region
            + self.too_close
            + self.too_far
            + self.wrong_direction
            + self.collision
            + self.grounding_error
            + self.parse_error
    }
}

/// Success rates per level and overall, failure reasons and grounding accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub successes: usize,
    pub overall: f64,
    pub levels: LevelsReport,
    pub failures: FailureCounts,
    /// Share of tuples grounded to their labelled token, over records whose parse
    /// produced as many tuples as the ground truth.
    pub grounding_accuracy: f64,
    pub records: Vec<RecordOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(records: Vec<RecordOutcome>) -> Self {
        let mut levels = LevelsReport::default();
        let mut failures = FailureCounts::default();
        let (mut hits, mut checked) = (0, 0);
        for r in &records {
            let s = levels.get_mut(r.level);
            s.count += 1;
            s.successes += usize::from(r.success);
            if let Some(reason) = r.reason {
                failures.bump(reason);
            }
            hits += r.correct_references;
            checked += r.labels_checked;
        }
        for l in Level::ALL {
            *levels.get_mut(l) = levels.get_mut(l).finish();
        }
        let count = records.len();
        let successes = records.iter().filter(|r| r.success).count();
        Self {
            count,
            successes,
            overall: if count == 0 { 0.0 } else { successes as f64 / count as f64 },
            levels,
            failures,
            grounding_accuracy: if checked == 0 { 0.0 } else { hits as f64 / checked as f64 },
            records,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn ground_record(pipeline: &Pipeline<'_>, r: &DatasetRecord) -> Result<Vec<GroundedPair>, FailureReason> {
    match pipeline {
        Pipeline::Oracle => Ok(r.gt_pairs()),
        Pipeline::Model(assets) => {
            let parsed = assets.parse(&r.instruction).map_err(|_| FailureReason::ParseError)?;
            assets.ground(&r.scene, &parsed).map_err(|_| FailureReason::GroundingError)
        }
    }
}

fn eval_record(pipeline: &Pipeline<'_>, r: &DatasetRecord, cfg: &EvalConfig) -> RecordOutcome {
    let mut out = RecordOutcome {
        id: r.id,
        level: r.level,
        success: false,
        reason: None,
        point: None,
        correct_references: 0,
        labels_checked: 0,
    };
    let grounded = match ground_record(pipeline, r) {
        Ok(g) => g,
        Err(reason) => {
            out.reason = Some(reason);
            return out;
        }
    };
    if grounded.len() == r.gt_labels.len() {
        out.labels_checked = grounded.len();
        out.correct_references = grounded.iter().zip(&r.gt_labels).filter(|(g, &y)| g.object_index == y).count();
    }
    let point = placement_field(&grounded, &r.scene, &cfg.placement)
        .and_then(|f| normalize_and_sample(&f, derived_seed(cfg.seed, "eval", r.id)));
    match point {
        Ok(x) => {
            let EvalOutcome { success, reason } =
                evaluate_placement_with(x, r, &SuccessThresholds::from(&cfg.placement));
            out.point = Some(x);
            out.success = success;
            out.reason = reason;
        }
        // contradictory groundings leave nothing to sample from
        Err(_) => out.reason = Some(FailureReason::GroundingError),
    }
    out
}

/// Runs the pipeline on every record. Records are processed in parallel and
/// reported in input order, so the report depends only on inputs and seed.
pub fn run_eval(pipeline: &Pipeline<'_>, records: &[DatasetRecord], cfg: &EvalConfig) -> EvalReport {
    let outcomes = records.par_iter().map(|r| eval_record(pipeline, r, cfg)).collect();
    EvalReport::from_outcomes(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::{AdapterConfig, AdapterPair};
    use crate::embeddings::{SyntheticConfig, SyntheticWorld};
    use crate::harness::{gen_dataset, DatasetSpec, InstructionTemplates, ObjectVocabulary, Split};
    use crate::parser::Lexicon;

    fn records() -> Vec<DatasetRecord> {
        let spec = DatasetSpec::scaled(0, 40, 3).only(&[Split::TestSeen, Split::TestUnseenInst]);
        gen_dataset(&spec, &ObjectVocabulary::default(), &InstructionTemplates::default(), &Lexicon::default()).unwrap()
    }

    #[test]
    fn oracle_always_succeeds() {
        let recs = records();
        let report = run_eval(&Pipeline::Oracle, &recs, &EvalConfig::default());
        assert_eq!(report.count, 80);
        assert_eq!(report.successes, 80);
        assert_eq!(report.grounding_accuracy, 1.0);
        assert_eq!(report.failures.total(), 0);
    }

    #[test]
    fn model_report_is_consistent_and_deterministic() {
        let recs = records();
        let vocab = ObjectVocabulary::default();
        let names: Vec<&str> = vocab.all().collect();
        let world = SyntheticWorld::new(&names, SyntheticConfig { dim: 64, ..Default::default() });
        let pair = AdapterPair::init(&AdapterConfig { dim: 64, hidden: 16, ..Default::default() }, 0).unwrap();
        let lex = Lexicon::default();
        let assets = ModelAssets { pair: &pair, encoder: &world, lexicon: &lex, llm: None };
        let cfg = EvalConfig { seed: 5, ..Default::default() };
        let a = run_eval(&Pipeline::Model(assets), &recs, &cfg);
        let b = run_eval(&Pipeline::Model(assets), &recs, &cfg);
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.failures.total(), a.count - a.successes);
        let weighted = (a.levels.table.successes + a.levels.one_obj.successes + a.levels.two_obj.successes) as f64
            / a.count as f64;
        assert!((weighted - a.overall).abs() < 1e-12);
        assert_eq!(a.failures.parse_error, 0);
    }

    #[test]
    fn empty_report() {
        let r = EvalReport::from_outcomes(vec![]);
        assert_eq!((r.count, r.overall), (0, 0.0));
    }
}
