//! Few-shot LLM parsing: prompt construction, completion parsing and a small
//! blocking HTTP client.
//!
//! Wire protocol: `POST {prompt, max_tokens, temperature: 0}` answered by `{text}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_instruction, Lexicon, ParseSource, ParsedInstruction};
use crate::scene::Tuple;
use crate::{Error, Result};

pub const LLM_URL_ENV: &str = "PLACE_LLM_URL";

const PROMPT_HEADER: &str =
    "Parse each placement instruction into (reference | relation) tuples, one per line.\n";

/// One worked example for the prompt context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptExample {
    pub instruction: String,
    pub tuples: Vec<Tuple>,
}

/// Renders the few-shot prompt. Examples should come from seen templates only.
pub fn build_llm_prompt(examples: &[PromptExample], query: &str) -> Result<String> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("the LLM prompt needs at least one example".into()));
    }
    let mut out = String::from(PROMPT_HEADER);
    for ex in examples {
        out.push('\n');
        out.push_str("instruction: ");
        out.push_str(ex.instruction.trim());
        out.push('\n');
        for t in &ex.tuples {
            out.push_str(&format!("({} | {})\n", t.ref_expr(), t.rel_expr()));
        }
    }
    out.push_str("\ninstruction: ");
    out.push_str(query.trim());
    out.push('\n');
    Ok(out)
}

/// Extracts `(reference | relation)` lines from a completion, ignoring surrounding prose.
///
/// Relations outside the lexicon are kept verbatim and flagged with `None`.
pub fn parse_llm_output(completion: &str, lex: &Lexicon) -> Result<ParsedInstruction> {
    let mut tuples = Vec::new();
    let mut relations = Vec::new();
    for line in completion.lines() {
        let Some(open) = line.find('(') else { continue };
        let Some(close) = line[open..].find(')') else { continue };
        let inner = &line[open + 1..open + close];
        let Some((reference, relation)) = inner.split_once('|') else { continue };
        let Ok(t) = Tuple::new(reference.trim().to_lowercase(), relation.trim().to_lowercase())
        else {
            continue;
        };
        relations.push(lex.lookup(t.rel_expr()));
        tuples.push(t);
    }
    if tuples.is_empty() {
        return Err(Error::LlmFormatFailure {
            completion: completion.to_string(),
        });
    }
    Ok(ParsedInstruction {
        tuples,
        relations,
        source: ParseSource::Llm,
    })
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f32,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Blocking client for a completion endpoint.
#[derive(Debug, Clone)]
pub struct LlmClient {
    url: String,
    timeout: Duration,
    max_tokens: u32,
}

impl LlmClient {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(30),
            max_tokens: 64,
        }
    }

    /// Reads the endpoint from `PLACE_LLM_URL`.
    pub fn from_env() -> Result<Self> {
        std::env::var(LLM_URL_ENV)
            .map(Self::new)
            .map_err(|_| Error::LlmUnavailable(format!("{LLM_URL_ENV} is not set")))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn complete(&self, prompt: &str) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent
            .post(&self.url)
            .send_json(CompletionRequest {
                prompt,
                max_tokens: self.max_tokens,
                temperature: 0.0,
            })
            .map_err(|e| Error::LlmUnavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::LlmUnavailable(format!("endpoint answered {status}")));
        }
        let body: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::LlmUnavailable(format!("malformed response: {e}")))?;
        Ok(body.text)
    }

    /// Prompts the model and parses its completion.
    ///
    /// A completion without any tuple line yields a single flagged tuple that
    /// carries the raw text, so relation grounding can still run on it.
    pub fn parse(
        &self,
        examples: &[PromptExample],
        instruction: &str,
        lex: &Lexicon,
    ) -> Result<ParsedInstruction> {
        let prompt = build_llm_prompt(examples, instruction)?;
        let completion = self.complete(&prompt)?;
        match parse_llm_output(&completion, lex) {
            Ok(p) => Ok(p),
            Err(Error::LlmFormatFailure { completion }) => {
                let raw = completion.trim();
                let tuple = Tuple::new(raw, raw).map_err(|_| Error::LlmFormatFailure {
                    completion: completion.clone(),
                })?;
                Ok(ParsedInstruction {
                    tuples: vec![tuple],
                    relations: vec![None],
                    source: ParseSource::LlmFallback,
                })
            }
            Err(e) => Err(e),
        }
    }
}

/// Builds prompt examples by parsing seen-template instructions with the grammar.
pub fn examples_from_instructions<'a>(
    instructions: impl IntoIterator<Item = &'a str>,
    lex: &Lexicon,
) -> Result<Vec<PromptExample>> {
    instructions
        .into_iter()
        .map(|i| {
            Ok(PromptExample {
                instruction: i.to_string(),
                tuples: parse_instruction(i, lex)?.tuples,
            })
        })
        .collect()
}
