use serde::{Deserialize, Serialize};

use super::lexicon::MetaphorIdentifier;
use super::paraphrase::{paraphrase, ParaphraseScorer};
use super::taxonomy::{conceptualize, Taxonomy};
use super::token::tag_tokens;
use crate::error::{HanError, Result};

/// Where a mapping came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub user_id: String,
    pub tweet: usize,
    pub token: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptMapping {
    pub target: String,
    pub source: String,
    /// `TARGET IS SOURCE`.
    pub rendered: String,
    pub origin: Origin,
}

impl ConceptMapping {
    /// Target and source are the same concept.
    pub fn is_degenerate(&self) -> bool {
        self.target == self.source
    }
}

pub fn build_mapping(target: &str, source: &str, origin: Origin) -> Result<ConceptMapping> {
    let (target, source) = (target.trim().to_uppercase(), source.trim().to_uppercase());
    if target.is_empty() || source.is_empty() {
        return Err(HanError::EmptyConcept);
    }
    Ok(ConceptMapping {
        rendered: format!("{target} IS {source}"),
        target,
        source,
        origin,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Extraction {
    pub mappings: Vec<ConceptMapping>,
    /// Metaphoric tokens whose paraphrase or concepts could not be resolved.
    pub skipped: usize,
}

/// Runs tag → identify → paraphrase → conceptualize → map over a user's
/// tokenized tweets. Mappings come out in (tweet, token) order.
pub fn extract_user_mcms(
    user_id: &str,
    tweets: &[Vec<String>],
    identifier: &dyn MetaphorIdentifier,
    taxonomy: &Taxonomy,
    scorer: &dyn ParaphraseScorer,
) -> Result<Extraction> {
    let mut out = Extraction::default();
    for (ti, words) in tweets.iter().enumerate() {
        if words.is_empty() {
            continue;
        }
        let tokens = tag_tokens(words, taxonomy);
        for label in identifier.identify(&tokens)?.iter().filter(|l| l.is_metaphor()) {
            let token = &tokens[label.index];
            let mapping = paraphrase(token, &tokens, taxonomy, scorer).and_then(|para| {
                let target = conceptualize(&para, token.pos, taxonomy)?;
                let source = conceptualize(&token.lemma, token.pos, taxonomy)?;
                build_mapping(
                    &target,
                    &source,
                    Origin {
                        user_id: user_id.to_string(),
                        tweet: ti,
                        token: token.index,
                    },
                )
            });
            match mapping {
                Ok(m) => out.mappings.push(m),
                Err(_) => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> Origin {
        Origin {
            user_id: "u".into(),
            tweet: 0,
            token: 3,
        }
    }

    #[test]
    fn rendering() {
        assert_eq!(build_mapping("IMPORTANCE", "INTERIORITY", origin()).unwrap().rendered, "IMPORTANCE IS INTERIORITY");
        assert_eq!(build_mapping("level", "importance", origin()).unwrap().rendered, "LEVEL IS IMPORTANCE");
        let same = build_mapping("X", "X", origin()).unwrap();
        assert_eq!(same.rendered, "X IS X");
        assert!(same.is_degenerate());
        assert!(matches!(build_mapping("", "X", origin()), Err(HanError::EmptyConcept)));
        assert!(matches!(build_mapping("X", "  ", origin()), Err(HanError::EmptyConcept)));
    }
}
