//! Removal of explicit depression cues (the IMDL dataset variant).

use super::preprocess::{strip_noise, tokenize, MIN_TOKENS};
use super::record::{Dataset, UserRecord};

/// Any token containing one of these (case-insensitively) is deleted.
pub const CUE_SUBSTRINGS: [&str; 5] = ["depress", "diagnos", "anxiety", "bipolar", "disorder"];

/// Self-report openers preceding "diagnosed (with) depression".
const OPENERS: [&[&str]; 4] = [&["i", "'m"], &["i", "was"], &["i", "am"], &["i", "'ve", "been"]];

/// Length of a diagnosis statement starting at `tokens[i]`, if any.
fn diagnosis_len(lower: &[String], i: usize) -> Option<usize> {
    for opener in OPENERS {
        let mut j = i;
        if !opener.iter().all(|w| {
            let ok = lower.get(j).is_some_and(|t| t == w);
            j += 1;
            ok
        }) {
            continue;
        }
        if lower.get(j).map(String::as_str) != Some("diagnosed") {
            continue;
        }
        j += 1;
        if lower.get(j).map(String::as_str) == Some("with") {
            j += 1;
        }
        if lower.get(j).is_some_and(|t| t.starts_with("depress")) {
            return Some(j + 1 - i);
        }
    }
    None
}

/// Deletes diagnosis statements and cue-bearing tokens.
pub fn imdl_tokens(tokens: &[String]) -> Vec<String> {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if let Some(n) = diagnosis_len(&lower, i) {
            i += n;
            continue;
        }
        if !CUE_SUBSTRINGS.iter().any(|cue| lower[i].contains(cue)) {
            out.push(tokens[i].clone());
        }
        i += 1;
    }
    out
}

/// Transforms one tweet; `None` when fewer than [`MIN_TOKENS`] remain.
pub fn imdl_tweet(text: &str) -> Option<String> {
    let tokens = imdl_tokens(&tokenize(&strip_noise(text)));
    (tokens.len() >= MIN_TOKENS).then(|| tokens.join(" "))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ImdlStats {
    pub tweets_removed: usize,
    pub users_removed: usize,
}

/// Applies [`imdl_tweet`] to every tweet.
///
/// Rejected tweets are removed together with their embedding rows; users
/// left without tweets are dropped. Surviving rows keep their embeddings,
/// so text edits are not reflected until the embeddings are re-exported.
pub fn imdl_transform(dataset: &Dataset) -> (Dataset, ImdlStats) {
    let mut stats = ImdlStats::default();
    let mut users = Vec::with_capacity(dataset.users.len());
    for u in &dataset.users {
        let mut keep = Vec::new();
        let mut tweets = Vec::new();
        for (i, t) in u.tweets.iter().enumerate() {
            match imdl_tweet(t) {
                Some(t) => {
                    keep.push(i);
                    tweets.push(t);
                }
                None => stats.tweets_removed += 1,
            }
        }
        if tweets.is_empty() {
            stats.users_removed += 1;
            continue;
        }
        users.push(UserRecord {
            tweets,
            tweet_emb: u.tweet_emb.select_rows(&keep),
            ..u.clone()
        });
    }
    (Dataset { d: dataset.d, users }, stats)
}
