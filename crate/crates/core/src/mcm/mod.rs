//! Metaphor concept mapping (MCM) acquisition.
//!
//! Metaphor identification and paraphrase ranking sit behind the
//! [`MetaphorIdentifier`] and [`ParaphraseScorer`] traits; the defaults are
//! a trigger lexicon and a synonym co-occurrence count. Words are abstracted
//! into concepts over a hypernym [`Taxonomy`] using a knee on the
//! sense-coverage curve.

mod knee;
mod lexicon;
mod mapping;
mod paraphrase;
mod taxonomy;
mod token;

pub use knee::knee_point;
pub use lexicon::{identify_metaphors, Label, Lexicon, MetaphorIdentifier, MetaphorLabel};
pub use mapping::{build_mapping, extract_user_mcms, ConceptMapping, Extraction, Origin};
pub use paraphrase::{paraphrase, paraphrase_candidates, CooccurrenceScorer, ParaphraseScorer};
pub use taxonomy::{conceptualize, Taxonomy};
pub use token::{tag_tokens, Pos, Token};
