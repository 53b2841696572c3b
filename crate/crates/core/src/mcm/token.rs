use std::fmt;
use std::str::FromStr;

use super::taxonomy::Taxonomy;
use crate::error::HanError;

/// Coarse part of speech.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pos {
    Verb,
    Noun,
    Adj,
    Adv,
    Other,
}

impl Pos {
    /// Closed-class words are never metaphoric or paraphrased.
    pub fn is_open_class(self) -> bool {
        self != Pos::Other
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Verb => "VERB",
            Pos::Noun => "NOUN",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Other => "OTHER",
        }
    }

    /// Part of speech from a node-id code (`n`, `v`, `a`/`s`, `r`).
    pub fn from_code(code: &str) -> Option<Pos> {
        match code {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            "a" | "s" => Some(Pos::Adj),
            "r" => Some(Pos::Adv),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = HanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "VERB" => Ok(Pos::Verb),
            "NOUN" => Ok(Pos::Noun),
            "ADJ" => Ok(Pos::Adj),
            "ADV" => Ok(Pos::Adv),
            "OTHER" => Ok(Pos::Other),
            _ => Err(HanError::InvalidArgument(format!("unknown part of speech {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Always lowercase.
    pub lemma: String,
    pub pos: Pos,
    /// Position in the tweet.
    pub index: usize,
}

const SUFFIXES: [&str; 6] = ["est", "ing", "er", "ed", "es", "s"];

/// Lemma for a lowercase word: the word itself when the taxonomy knows it,
/// else the first known suffix-stripped form (trying the bare stem, the stem
/// plus `e`, and the stem with a doubled final consonant undone).
fn lemmatize(lower: &str, taxonomy: &Taxonomy) -> String {
    if taxonomy.contains_lemma(lower) {
        return lower.to_string();
    }
    for suffix in SUFFIXES {
        let Some(stem) = lower.strip_suffix(suffix) else { continue };
        if stem.chars().count() < 2 {
            continue;
        }
        let mut forms = vec![stem.to_string(), format!("{stem}e")];
        let b = stem.as_bytes();
        if b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] {
            forms.push(stem[..stem.len() - 1].to_string());
        }
        if let Some(f) = forms.into_iter().find(|f| taxonomy.contains_lemma(f)) {
            return f;
        }
    }
    lower.to_string()
}

/// Default tagger: taxonomy-backed lemmatization, with the part of speech
/// of the lemma's first sense ([`Pos::Other`] for unknown words).
pub fn tag_tokens(tokens: &[String], taxonomy: &Taxonomy) -> Vec<Token> {
    tokens
        .iter()
        .enumerate()
        .map(|(index, surface)| {
            let lemma = lemmatize(&surface.to_lowercase(), taxonomy);
            let pos = taxonomy.first_pos(&lemma).unwrap_or(Pos::Other);
            Token {
                surface: surface.clone(),
                lemma,
                pos,
                index,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagging() {
        let tax = Taxonomy::parse("great.a.01\t-\t1\nmatter.n.01\t-\t1\nlove.v.01\t-\t1\nbig.a.01\t-\t1\n").unwrap();
        let words: Vec<String> = ["Greater", "matters", "loved", "biggest", "the"].map(String::from).into();
        let t = tag_tokens(&words, &tax);
        let got: Vec<(&str, Pos)> = t.iter().map(|t| (t.lemma.as_str(), t.pos)).collect();
        assert_eq!(
            got,
            [
                ("great", Pos::Adj),
                ("matter", Pos::Noun),
                ("love", Pos::Verb),
                ("big", Pos::Adj),
                ("the", Pos::Other)
            ]
        );
        assert_eq!(t[4].index, 4);
        assert_eq!(t[0].surface, "Greater");
    }

    #[test]
    fn pos_parsing() {
        assert_eq!("noun".parse::<Pos>().unwrap(), Pos::Noun);
        assert!("X".parse::<Pos>().is_err());
        assert_eq!(Pos::from_code("s"), Some(Pos::Adj));
        assert!(!Pos::Other.is_open_class());
    }
}
