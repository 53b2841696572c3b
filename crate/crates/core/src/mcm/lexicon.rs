use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::token::{Pos, Token};
use crate::error::{HanError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Metaphor,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetaphorLabel {
    pub index: usize,
    pub label: Label,
}

impl MetaphorLabel {
    pub fn is_metaphor(&self) -> bool {
        self.label == Label::Metaphor
    }
}

/// Labels every token of a tweet as metaphoric or literal.
pub trait MetaphorIdentifier {
    fn identify(&self, tokens: &[Token]) -> Result<Vec<MetaphorLabel>>;
}

/// Metaphor lexicon: `(lemma, pos)` entries with context trigger lemmas.
///
/// File format, one entry per line: `lemma<TAB>POS<TAB>trigger1,trigger2`.
/// Blank lines and lines starting with `#` are ignored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<(String, Pos), BTreeSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<I, S>(&mut self, lemma: &str, pos: Pos, triggers: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.entries
            .entry((lemma.to_lowercase(), pos))
            .or_default()
            .extend(triggers.into_iter().map(|t| t.as_ref().to_lowercase()));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn triggers(&self, lemma: &str, pos: Pos) -> Option<&BTreeSet<String>> {
        self.entries.get(&(lemma.to_string(), pos))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |message: String| HanError::MalformedLexicon { line, message };
            let l = raw.trim_end_matches('\r');
            if l.trim().is_empty() || l.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = l.split('\t').collect();
            let [lemma, pos, triggers] = fields[..] else {
                return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let lemma = lemma.trim();
            if lemma.is_empty() {
                return Err(bad("empty lemma".into()));
            }
            let pos: Pos = pos.trim().parse().map_err(|e: HanError| bad(e.to_string()))?;
            let triggers: Vec<&str> = triggers.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
            if triggers.is_empty() {
                return Err(bad(format!("no triggers for {lemma:?}")));
            }
            lex.insert(lemma, pos, triggers);
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| HanError::io(path, e))?)
    }
}

impl MetaphorIdentifier for Lexicon {
    fn identify(&self, tokens: &[Token]) -> Result<Vec<MetaphorLabel>> {
        identify_metaphors(tokens, self)
    }
}

/// Lexicon stub: a token is metaphoric iff it is open-class, its
/// `(lemma, pos)` is in the lexicon, and one of the entry's trigger lemmas
/// occurs elsewhere in the tweet.
pub fn identify_metaphors(tokens: &[Token], lexicon: &Lexicon) -> Result<Vec<MetaphorLabel>> {
    if tokens.is_empty() {
        return Err(HanError::InvalidArgument("identify_metaphors: empty tweet".into()));
    }
    Ok(tokens
        .iter()
        .map(|t| {
            let fires = t.pos.is_open_class()
                && lexicon.triggers(&t.lemma, t.pos).is_some_and(|trig| {
                    tokens.iter().any(|o| o.index != t.index && trig.contains(&o.lemma))
                });
            MetaphorLabel {
                index: t.index,
                label: if fires { Label::Metaphor } else { Label::Literal },
            }
        })
        .collect())
}
