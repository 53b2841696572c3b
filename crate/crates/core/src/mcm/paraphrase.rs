use std::collections::BTreeSet;

use super::taxonomy::Taxonomy;
use super::token::Token;
use crate::error::{HanError, Result};

/// Scores how well a candidate lemma fits the tweet context.
pub trait ParaphraseScorer {
    fn score(&self, candidate: &str, context: &[Token], taxonomy: &Taxonomy) -> f64;
}

/// Counts `(context lemma, synonym set)` pairs where the set holds both the
/// context lemma and the candidate.
#[derive(Clone, Copy, Debug, Default)]
pub struct CooccurrenceScorer;

impl ParaphraseScorer for CooccurrenceScorer {
    fn score(&self, candidate: &str, context: &[Token], taxonomy: &Taxonomy) -> f64 {
        let mut n = 0usize;
        for t in context.iter().filter(|t| t.lemma != candidate) {
            n += taxonomy
                .synsets_with(&t.lemma)
                .filter(|id| taxonomy.synonyms(id).any(|s| s == candidate))
                .count();
        }
        n as f64
    }
}

/// Synonyms of the lemma's senses plus the members of their direct
/// hypernyms, all with the token's part of speech, without the lemma itself.
pub fn paraphrase_candidates(token: &Token, taxonomy: &Taxonomy) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for sense in taxonomy.senses(&token.lemma, token.pos) {
        out.extend(taxonomy.synonyms(sense).map(str::to_string));
        for h in taxonomy.hypernyms(sense) {
            if taxonomy.pos(h) == Some(token.pos) {
                out.extend(taxonomy.synonyms(h).map(str::to_string));
            }
        }
    }
    out.remove(&token.lemma);
    out
}

/// Best-fitting literal replacement for a metaphoric token. Ties go to the
/// lexicographically smaller lemma.
pub fn paraphrase(token: &Token, context: &[Token], taxonomy: &Taxonomy, scorer: &dyn ParaphraseScorer) -> Result<String> {
    let others: Vec<Token> = context.iter().filter(|t| t.index != token.index).cloned().collect();
    let mut best: Option<(f64, String)> = None;
    for c in paraphrase_candidates(token, taxonomy) {
        let s = scorer.score(&c, &others, taxonomy);
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, c));
        }
    }
    best.map(|(_, c)| c).ok_or_else(|| HanError::NoParaphrase(token.lemma.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcm::token::Pos;

    const TAX: &str = "\
core.n.01\tinteriority.n.01\t6
core.n.02\tcenter.n.01\t3
center.n.01\tinteriority.n.01\t0
interiority.n.01\t-\t0
importance.n.01\t-\t4
core.n.03\timportance.n.01\t1
syn\timportance.n.01\timportance,matter
";

    fn tok(lemma: &str, pos: Pos, index: usize) -> Token {
        Token {
            surface: lemma.into(),
            lemma: lemma.into(),
            pos,
            index,
        }
    }

    struct Favor(&'static str);
    impl ParaphraseScorer for Favor {
        fn score(&self, c: &str, _: &[Token], _: &Taxonomy) -> f64 {
            f64::from(u8::from(c == self.0))
        }
    }

    #[test]
    fn candidates_from_synonyms_and_hypernyms() {
        let tax = Taxonomy::parse(TAX).unwrap();
        let c = paraphrase_candidates(&tok("core", Pos::Noun, 0), &tax);
        assert_eq!(c.into_iter().collect::<Vec<_>>(), ["center", "importance", "interiority", "matter"]);
    }

    #[test]
    fn scorer_and_ties() {
        let tax = Taxonomy::parse(TAX).unwrap();
        let core = tok("core", Pos::Noun, 0);
        assert_eq!(paraphrase(&core, &[core.clone()], &tax, &Favor("interiority")).unwrap(), "interiority");
        // all zero: lexicographically smallest
        assert_eq!(paraphrase(&core, &[core.clone()], &tax, &CooccurrenceScorer).unwrap(), "center");
        let ctx = [core.clone(), tok("matter", Pos::Noun, 1)];
        assert_eq!(paraphrase(&core, &ctx, &tax, &CooccurrenceScorer).unwrap(), "importance");
    }

    #[test]
    fn no_candidates() {
        let tax = Taxonomy::parse("alone.n.01\t-\t1\n").unwrap();
        let t = tok("alone", Pos::Noun, 0);
        assert!(matches!(paraphrase(&t, &[], &tax, &CooccurrenceScorer), Err(HanError::NoParaphrase(_))));
    }
}
