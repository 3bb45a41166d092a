//! Synthetic datasets, the success evaluator, evaluation runs and the CLI.

pub mod cli;
mod dataset;
mod evaluate;
mod generate;
mod run;

pub use dataset::{build_embedding_store, load_dataset, save_dataset, EMBEDDINGS_FILE, INSTRUCTIONS_FILE, SCENES_DIR};
pub use evaluate::{evaluate_placement, evaluate_placement_with, EvalOutcome, FailureReason, SuccessThresholds};
pub use generate::{
    gen_dataset, gen_instruction, render_instruction, DatasetSpec, InstructionTemplates, LevelCounts, ObjectVocabulary,
    TemplateRelation,
};
pub use run::{run_eval, EvalConfig, EvalReport, FailureCounts, LevelStats, LevelsReport, Pipeline, RecordOutcome};

use serde::{Deserialize, Serialize};

use crate::adapter::TrainSample;
use crate::relation::CanonicalRelation;
use crate::scene::{GroundedPair, Scene, Tuple};
use crate::{Error, Result};

/// How many references an instruction has and of what kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "table")]
    Table,
    #[serde(rename = "1obj")]
    OneObject,
    #[serde(rename = "2obj")]
    TwoObjects,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Table, Level::OneObject, Level::TwoObjects];

    pub fn tuple_count(self) -> usize {
        match self {
            Level::Table | Level::OneObject => 1,
            Level::TwoObjects => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    TestSeen,
    TestUnseenObj,
    TestUnseenInst,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::TestSeen, Split::TestUnseenObj, Split::TestUnseenInst];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::TestSeen => "test_seen",
            Split::TestUnseenObj => "test_unseen_obj",
            Split::TestUnseenInst => "test_unseen_inst",
        }
    }

    pub fn uses_unseen_objects(self) -> bool {
        self == Split::TestUnseenObj
    }

    pub fn uses_unseen_instructions(self) -> bool {
        self == Split::TestUnseenInst
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown split {s:?}")))
    }
}

/// A scene, its instruction and the ground truth the generator recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: u64,
    pub scene: Scene,
    pub instruction: String,
    pub gt_tuples: Vec<Tuple>,
    pub gt_labels: Vec<usize>,
    pub gt_relations: Vec<CanonicalRelation>,
    pub level: Level,
    pub split: Split,
}

impl DatasetRecord {
    /// Checks list lengths, label ranges and that the level matches the references.
    pub fn validate(&self) -> Result<()> {
        let l = self.gt_tuples.len();
        if self.gt_labels.len() != l || self.gt_relations.len() != l {
            return Err(Error::InvalidInput(format!(
                "record {}: {} tuples, {} labels, {} relations",
                self.id,
                l,
                self.gt_labels.len(),
                self.gt_relations.len()
            )));
        }
        if l != self.level.tuple_count() {
            return Err(Error::InvalidInput(format!(
                "record {}: level {:?} needs {} tuples, found {l}",
                self.id,
                self.level,
                self.level.tuple_count()
            )));
        }
        for g in self.gt_pairs() {
            g.validate(&self.scene)?;
            if (self.level == Level::Table) != g.relation.is_region() {
                return Err(Error::InvalidInput(format!(
                    "record {}: relation {} does not fit level {:?}",
                    self.id, g.relation, self.level
                )));
            }
        }
        Ok(())
    }

    pub fn gt_pairs(&self) -> Vec<GroundedPair> {
        self.gt_labels
            .iter()
            .zip(&self.gt_relations)
            .map(|(&object_index, &relation)| GroundedPair { object_index, relation })
            .collect()
    }

    pub fn train_sample(&self) -> TrainSample {
        TrainSample {
            scene: self.scene.clone(),
            tuples: self.gt_tuples.clone(),
            labels: self.gt_labels.clone(),
        }
    }
}
