//! Instruction parsing into ⟨reference, relation⟩ tuples.
//!
//! The default path is a deterministic lexicon grammar: strip the leading
//! prefix/verb/pronoun run, then scan left to right for the longest relation
//! expression. Each relation opens a tuple whose reference is everything up
//! to the next `and` that is immediately followed by another relation
//! expression. An `and` inside an object name therefore never splits it.
//!
//! [`llm`] implements the optional few-shot LLM route.

mod lexicon;
pub mod llm;

pub use lexicon::{Lexicon, RelationEntry};

use serde::{Deserialize, Serialize};

use crate::relation::CanonicalRelation;
use crate::scene::Tuple;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseSource {
    Grammar,
    Llm,
    /// The completion had no tuple form; the single tuple carries the raw text.
    LlmFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInstruction {
    pub tuples: Vec<Tuple>,
    /// Canonical relation per tuple; `None` flags a relation the lexicon does not know.
    pub relations: Vec<Option<CanonicalRelation>>,
    pub source: ParseSource,
}

impl ParsedInstruction {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];

/// Lowercases and splits on anything that is not a word character.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses `text` with the lexicon grammar.
pub fn parse_instruction(text: &str, lex: &Lexicon) -> Result<ParsedInstruction> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::InvalidInput("empty instruction".into()));
    }
    let start = lex.skip_preamble(&tokens);
    let mut pos = (start..tokens.len())
        .find(|&i| lex.match_relation(&tokens[i..]).is_some())
        .ok_or_else(|| Error::ParseFailure(text.to_string()))?;

    let mut tuples = Vec::new();
    let mut relations = Vec::new();
    loop {
        let (len, relation) = lex
            .match_relation(&tokens[pos..])
            .expect("pos always points at a relation match");
        let ref_start = pos + len;
        let ref_end = (ref_start..tokens.len())
            .find(|&k| tokens[k] == "and" && lex.match_relation(&tokens[k + 1..]).is_some())
            .unwrap_or(tokens.len());

        let mut words = &tokens[ref_start..ref_end];
        while words.first().is_some_and(|w| w == "of") {
            words = &words[1..];
        }
        while words.first().is_some_and(|w| ARTICLES.contains(&w.as_str())) {
            words = &words[1..];
        }
        if words.is_empty() {
            return Err(Error::ParseFailure(text.to_string()));
        }
        tuples.push(Tuple::new(words.join(" "), relation.name())?);
        relations.push(Some(relation));

        if ref_end >= tokens.len() {
            break;
        }
        pos = ref_end + 1;
    }

    Ok(ParsedInstruction {
        tuples,
        relations,
        source: ParseSource::Grammar,
    })
}
