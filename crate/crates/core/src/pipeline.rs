//! Instruction and scene in, grounded pairs and a sampled placement out.

use crate::adapter::AdapterPair;
use crate::embeddings::Encoder;
use crate::geometry::Vec2;
use crate::grounding::ground_all;
use crate::parser::llm::{LlmClient, PromptExample};
use crate::parser::{parse_instruction, Lexicon, ParsedInstruction};
use crate::placement::{normalize_and_sample, placement_field, PlacementField, PlacementParams};
use crate::scene::{GroundedPair, Scene};
use crate::{Error, Result};

/// LLM client plus the seen-template examples that go in its prompt.
#[derive(Clone, Copy)]
pub struct LlmParsing<'a> {
    pub client: &'a LlmClient,
    pub examples: &'a [PromptExample],
}

/// Everything the learned pipeline needs besides the inputs.
#[derive(Clone, Copy)]
pub struct ModelAssets<'a> {
    pub pair: &'a AdapterPair,
    pub encoder: &'a dyn Encoder,
    pub lexicon: &'a Lexicon,
    /// Consulted only when the grammar finds no relation.
    pub llm: Option<LlmParsing<'a>>,
}

impl ModelAssets<'_> {
    /// Grammar first; the LLM, when configured, on a grammar failure.
    pub fn parse(&self, instruction: &str) -> Result<ParsedInstruction> {
        match parse_instruction(instruction, self.lexicon) {
            Err(Error::ParseFailure(msg)) => match self.llm {
                Some(llm) => llm.client.parse(llm.examples, instruction, self.lexicon),
                None => Err(Error::ParseFailure(msg)),
            },
            other => other,
        }
    }

    pub fn ground(&self, scene: &Scene, parsed: &ParsedInstruction) -> Result<Vec<GroundedPair>> {
        ground_all(scene, parsed, self.pair, self.encoder, self.lexicon)
    }
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub parsed: ParsedInstruction,
    pub grounded: Vec<GroundedPair>,
    pub field: PlacementField,
    pub point: Vec2,
}

/// Parse, ground, build the field and draw one placement.
pub fn ground_and_place(
    scene: &Scene,
    instruction: &str,
    assets: &ModelAssets<'_>,
    params: &PlacementParams,
    seed: u64,
) -> Result<Placement> {
    let parsed = assets.parse(instruction)?;
    let grounded = assets.ground(scene, &parsed)?;
    let field = placement_field(&grounded, scene, params)?;
    let point = normalize_and_sample(&field, seed)?;
    Ok(Placement { parsed, grounded, field, point })
}
