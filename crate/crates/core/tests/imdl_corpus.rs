mod common;

use std::fs;

use hankit::data::{imdl_transform, tokenize, Dataset, UserRecord, CUE_SUBSTRINGS, MIN_TOKENS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/imdl/corpus.txt");
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn dataset_of(tweets: &[String], per_user: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let users = tweets
        .chunks(per_user)
        .enumerate()
        .map(|(i, chunk)| {
            let mut u = common::user(&format!("u{i}"), (i % 2) as u8, chunk.len(), 1, 4, &mut rng);
            u.tweets = chunk.to_vec();
            u
        })
        .collect();
    Dataset::new(4, users).unwrap()
}

fn cue_tokens(ds: &Dataset) -> Vec<String> {
    ds.users
        .iter()
        .flat_map(|u| u.tweets.iter())
        .flat_map(|t| tokenize(t))
        .filter(|tok| {
            let low = tok.to_lowercase();
            CUE_SUBSTRINGS.iter().any(|c| low.contains(c))
        })
        .collect()
}

fn short_tweets(ds: &Dataset) -> usize {
    ds.users.iter().flat_map(|u| u.tweets.iter()).filter(|t| tokenize(t).len() < MIN_TOKENS).count()
}

fn check_transform(ds: &Dataset) -> (Dataset, usize) {
    let before = cue_tokens(ds).len();
    let (once, stats) = imdl_transform(ds);
    assert!(cue_tokens(&once).is_empty(), "{:?}", cue_tokens(&once));
    assert_eq!(short_tweets(&once), 0);
    for u in &once.users {
        assert!(!u.tweets.is_empty());
        assert_eq!(u.tweet_emb.rows(), u.tweets.len());
    }
    let (twice, again) = imdl_transform(&once);
    assert_eq!(twice, once);
    assert_eq!((again.tweets_removed, again.users_removed), (0, 0));
    let kept: usize = once.users.iter().map(|u| u.tweets.len()).sum();
    let total: usize = ds.users.iter().map(|u| u.tweets.len()).sum();
    assert_eq!(kept + stats.tweets_removed, total);
    (once, before)
}

#[test]
fn fixture_corpus_loses_every_cue() {
    let tweets = corpus();
    let ds = dataset_of(&tweets, 4);
    let (out, before) = check_transform(&ds);
    assert!(before >= 15, "fixture should be cue-heavy, found {before}");
    let kept: Vec<&str> = out.users.iter().flat_map(|u| u.tweets.iter().map(String::as_str)).collect();
    assert!(kept.contains(&"the weather is lovely today , going for a long walk"));
    assert!(!kept.iter().any(|t| t.contains("diagnosed")));
    assert!(kept.contains(&"my is through the roof before this exam"));
}

#[test]
fn user_without_surviving_tweets_is_dropped() {
    let ds = dataset_of(&["so depressed lol".to_string(), "anxiety".to_string()], 2);
    let (out, stats) = imdl_transform(&ds);
    assert!(out.is_empty());
    assert_eq!((stats.tweets_removed, stats.users_removed), (2, 1));
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => "[a-z]{1,7}".prop_map(String::from),
        1 => prop::sample::select(vec![
            "Depressed", "DEPRESSION", "undiagnosed", "anxiety-ridden", "bipolar", "Disorder,", "depressing!!",
            "#depressed", "diagnosed", "I'm", "was", "i", "with", "am", "'ve", "been", ",", "...", "@pal",
            "http://x.io/a", "don't", "ANXIETY",
        ])
        .prop_map(String::from),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_corpora(tweets in prop::collection::vec(prop::collection::vec(word(), 0..14), 1..20)) {
        let tweets: Vec<String> = tweets.into_iter().map(|w| w.join(" ")).collect();
        check_transform(&dataset_of(&tweets, 3));
    }
}

#[test]
fn untouched_users_keep_their_rows() {
    let tweets = vec!["a perfectly calm sunday morning".to_string(), "nothing to see here at all".to_string()];
    let ds = dataset_of(&tweets, 2);
    let (out, _) = imdl_transform(&ds);
    let u: &UserRecord = &out.users[0];
    assert_eq!(u.tweet_emb, ds.users[0].tweet_emb);
}
