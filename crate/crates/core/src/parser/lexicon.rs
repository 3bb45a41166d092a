use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::relation::CanonicalRelation;
use crate::{Error, Result};

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub expr: String,
    pub canonical: CanonicalRelation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LexiconFile {
    relations: Vec<RelationEntry>,
    prefixes: Vec<String>,
    verbs: Vec<String>,
    pronouns: Vec<String>,
}

/// Surface vocabulary for the grammar parser.
#[derive(Debug, Clone)]
pub struct Lexicon {
    file: LexiconFile,
    /// Tokenized relation expressions keyed by first token, longest first.
    relation_index: HashMap<String, Vec<(Vec<String>, CanonicalRelation)>>,
    preamble: Vec<Vec<String>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LexiconFile = serde_json::from_str(text)?;
        Self::from_parts(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("lexicon serializes")
    }

    fn from_parts(file: LexiconFile) -> Result<Self> {
        let mut covered = BTreeSet::new();
        let mut distinct = BTreeSet::new();
        for e in &file.relations {
            if e.expr.is_empty() || e.expr != e.expr.trim() || e.expr != e.expr.to_lowercase() {
                return Err(Error::InvalidInput(format!(
                    "relation expression {:?} must be lowercase and trimmed",
                    e.expr
                )));
            }
            covered.insert(e.canonical);
            distinct.insert(e.expr.as_str());
        }
        if let Some(missing) = CanonicalRelation::all().find(|r| !covered.contains(r)) {
            return Err(Error::InvalidInput(format!(
                "lexicon has no expression for relation {missing:?}"
            )));
        }
        if distinct.len() < 25 {
            return Err(Error::InvalidInput(format!(
                "lexicon needs at least 25 distinct relation expressions, found {}",
                distinct.len()
            )));
        }

        let mut relation_index: HashMap<String, Vec<(Vec<String>, CanonicalRelation)>> =
            HashMap::new();
        for e in &file.relations {
            let toks = tokenize(&e.expr);
            relation_index
                .entry(toks[0].clone())
                .or_default()
                .push((toks, e.canonical));
        }
        for entries in relation_index.values_mut() {
            entries.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        }
        let mut preamble: Vec<Vec<String>> = file
            .prefixes
            .iter()
            .chain(&file.verbs)
            .chain(&file.pronouns)
            .map(|p| tokenize(p))
            .filter(|t| !t.is_empty())
            .collect();
        preamble.sort_by_key(|p| std::cmp::Reverse(p.len()));

        Ok(Lexicon {
            file,
            relation_index,
            preamble,
        })
    }

    pub fn relations(&self) -> &[RelationEntry] {
        &self.file.relations
    }

    pub fn prefixes(&self) -> &[String] {
        &self.file.prefixes
    }

    pub fn verbs(&self) -> &[String] {
        &self.file.verbs
    }

    pub fn pronouns(&self) -> &[String] {
        &self.file.pronouns
    }

    /// Longest relation expression at the head of `tokens`: (token count, relation).
    pub fn match_relation(&self, tokens: &[String]) -> Option<(usize, CanonicalRelation)> {
        let first = tokens.first()?;
        self.relation_index.get(first)?.iter().find_map(|(expr, rel)| {
            (tokens.len() >= expr.len() && tokens[..expr.len()] == expr[..])
                .then_some((expr.len(), *rel))
        })
    }

    /// Number of leading tokens made of prefix, verb and pronoun phrases.
    pub(crate) fn skip_preamble(&self, tokens: &[String]) -> usize {
        let mut i = 0;
        'outer: while i < tokens.len() {
            for p in &self.preamble {
                if tokens.len() - i >= p.len() && tokens[i..i + p.len()] == p[..] {
                    i += p.len();
                    continue 'outer;
                }
            }
            break;
        }
        i
    }

    /// Resolves a relation string as written by an LLM: a lexicon expression or a canonical name.
    pub fn lookup(&self, rel: &str) -> Option<CanonicalRelation> {
        let norm = tokenize(rel).join(" ");
        if let Ok(r) = norm.parse::<CanonicalRelation>() {
            return Some(r);
        }
        self.file
            .relations
            .iter()
            .find(|e| tokenize(&e.expr).join(" ") == norm)
            .map(|e| e.canonical)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lexicon_counts() {
        let lex = Lexicon::default();
        assert_eq!(lex.prefixes().len(), 7);
        assert_eq!(lex.verbs().len(), 8);
        assert_eq!(lex.pronouns().len(), 3);
        let distinct: BTreeSet<_> = lex.relations().iter().map(|e| e.expr.as_str()).collect();
        assert!(distinct.len() >= 25);
        for r in CanonicalRelation::all() {
            assert!(lex.relations().iter().any(|e| e.canonical == r), "{r}");
        }
    }

    #[test]
    fn lexicon_round_trips_through_json() {
        let lex = Lexicon::default();
        let again = Lexicon::from_json(&lex.to_json()).unwrap();
        assert_eq!(again.relations(), lex.relations());
    }

    #[test]
    fn rejects_incomplete_lexicon() {
        let text = r#"{"relations":[{"expr":"left to","canonical":"left"}],
                       "prefixes":[],"verbs":[],"pronouns":[]}"#;
        assert!(Lexicon::from_json(text).is_err());
    }

    #[test]
    fn rejects_uppercase_expression() {
        let mut file: LexiconFile = serde_json::from_str(DEFAULT_LEXICON).unwrap();
        file.relations[0].expr = "Left To".into();
        assert!(Lexicon::from_parts(file).is_err());
    }

    #[test]
    fn lookup_accepts_names_and_expressions() {
        let lex = Lexicon::default();
        assert_eq!(lex.lookup("left").map(|r| r.name()), Some("left"));
        assert_eq!(lex.lookup("Bottom Right Corner").map(|r| r.name()), Some("bottom right corner"));
        assert_eq!(lex.lookup("on the left hand side of").map(|r| r.name()), Some("left"));
        assert_eq!(lex.lookup("rear right corner"), None);
    }

    #[test]
    fn preamble_skipping() {
        let lex = Lexicon::default();
        let toks = tokenize("could you please drop the thing to the left of");
        assert_eq!(lex.skip_preamble(&toks), 6);
        let toks = tokenize("put it behind the mug");
        assert_eq!(lex.skip_preamble(&toks), 2);
    }
}
