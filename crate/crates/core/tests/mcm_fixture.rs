use std::fs;
use std::path::PathBuf;

use hankit::data::tokenize;
use hankit::mcm::{
    conceptualize, extract_user_mcms, identify_metaphors, paraphrase, tag_tokens, CooccurrenceScorer, Lexicon, Pos,
    Taxonomy,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mcm").join(name)
}

fn load() -> (Lexicon, Taxonomy) {
    (
        Lexicon::load(fixture("lexicon.tsv")).unwrap(),
        Taxonomy::load(fixture("taxonomy.tsv")).unwrap(),
    )
}

fn single(tweet: &str) -> Vec<String> {
    let (lex, tax) = load();
    let out = extract_user_mcms("u", &[tokenize(tweet)], &lex, &tax, &CooccurrenceScorer).unwrap();
    out.mappings.into_iter().map(|m| m.rendered).collect()
}

#[test]
fn core_of_the_matter() {
    assert_eq!(single("this is the core of the matter"), ["IMPORTANCE IS INTERIORITY"]);
}

#[test]
fn greater_stakes() {
    assert_eq!(
        single("the bar keeps getting greater and the stakes feel so lofty"),
        ["LEVEL IS IMPORTANCE"]
    );
}

#[test]
fn walk_through_core() {
    let (lex, tax) = load();
    let tokens = tag_tokens(&tokenize("this is the core of the matter"), &tax);
    let labels = identify_metaphors(&tokens, &lex).unwrap();
    assert_eq!(labels.iter().filter(|l| l.is_metaphor()).map(|l| l.index).collect::<Vec<_>>(), [3]);
    let para = paraphrase(&tokens[3], &tokens, &tax, &CooccurrenceScorer).unwrap();
    assert_eq!(para, "importance");
    assert_eq!(conceptualize("core", Pos::Noun, &tax).unwrap(), "INTERIORITY");
    assert_eq!(conceptualize("importance", Pos::Noun, &tax).unwrap(), "IMPORTANCE");
    assert_eq!(conceptualize("high", Pos::Adj, &tax).unwrap(), "LEVEL");
    assert_eq!(conceptualize("great", Pos::Adj, &tax).unwrap(), "IMPORTANCE");
}

#[test]
fn fixture_user_matches_expected_file() {
    let (lex, tax) = load();
    let tweets: Vec<Vec<String>> =
        fs::read_to_string(fixture("user_tweets.txt")).unwrap().lines().map(tokenize).collect();
    let expected: Vec<(usize, usize, String)> = fs::read_to_string(fixture("expected.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].to_string())
        })
        .collect();
    let out = extract_user_mcms("fixture", &tweets, &lex, &tax, &CooccurrenceScorer).unwrap();
    let got: Vec<(usize, usize, String)> =
        out.mappings.iter().map(|m| (m.origin.tweet, m.origin.token, m.rendered.clone())).collect();
    assert_eq!(got, expected);
    // "lonely" fires but has no paraphrase candidates
    assert_eq!(out.skipped, 1);
    assert!(out.mappings.iter().all(|m| m.origin.user_id == "fixture"));

    // deterministic, and every origin points at a metaphoric token
    let again = extract_user_mcms("fixture", &tweets, &lex, &tax, &CooccurrenceScorer).unwrap();
    assert_eq!(again, out);
    for m in &out.mappings {
        let tokens = tag_tokens(&tweets[m.origin.tweet], &tax);
        let labels = identify_metaphors(&tokens, &lex).unwrap();
        assert!(labels[m.origin.token].is_metaphor());
    }
}

#[test]
fn no_metaphors_gives_nothing() {
    assert!(single("i had a quiet evening with tea and books").is_empty());
}
