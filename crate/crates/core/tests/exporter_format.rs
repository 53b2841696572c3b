use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use hankit::data::{load_dataset, parse_dataset, split, write_dataset};
use hankit::HanError;
use hankit::train::{evaluate, train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const D: usize = 768;

fn row(rng: &mut impl Rng, shift: f32) -> Vec<f32> {
    (0..D).map(|i| rng.random_range(-0.3f32..0.3) + if i < 8 { shift } else { 0.0 }).collect()
}

fn b64(r: &[f32]) -> String {
    STANDARD.encode(r.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>())
}

/// Ten users laid out the way the embedding exporter writes them.
fn exporter_file() -> (String, Vec<Vec<Vec<f32>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(768);
    let mut text = json!({"format": "hankit-dataset", "version": 1, "d": D}).to_string();
    text.push('\n');
    let mut all_rows = Vec::new();
    for i in 0..10 {
        let label = (i % 2) as u8;
        let shift = if label == 1 { 0.5 } else { -0.5 };
        let n_t = 2 + i % 4;
        let n_m = if i == 0 { 0 } else { i % 3 + 1 };
        let mut tweets: Vec<String> = (0..n_t).map(|t| format!("user {i} says thing number {t}")).collect();
        let mut t_rows: Vec<Vec<f32>> = (0..n_t).map(|_| row(&mut rng, shift)).collect();
        // the same sentence twice embeds to the same row
        tweets.push(tweets[0].clone());
        t_rows.push(t_rows[0].clone());
        let mcms: Vec<String> = (0..n_m).map(|m| format!("CONCEPT{m} IS CONCEPT{}", m + i)).collect();
        let m_rows: Vec<Vec<f32>> = (0..n_m).map(|_| row(&mut rng, shift)).collect();
        let line = json!({
            "user_id": format!("export-{i:02}"),
            "label": label,
            "tweets": tweets,
            "mcms": mcms,
            "tweet_emb": t_rows.iter().map(|r| b64(r)).collect::<Vec<_>>(),
            "mcm_emb": m_rows.iter().map(|r| b64(r)).collect::<Vec<_>>(),
        });
        text.push_str(&line.to_string());
        text.push('\n');
        all_rows.push(t_rows);
    }
    (text, all_rows)
}

#[test]
fn exporter_output_loads_round_trips_and_trains() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("export.jsonl");
    let (text, rows) = exporter_file();
    std::fs::write(&path, &text).unwrap();

    let ds = load_dataset(&path).unwrap();
    assert_eq!((ds.d, ds.len()), (768, 10));
    assert_eq!(ds.label_counts(), [5, 5]);
    assert!(ds.users[0].mcms.is_empty() && ds.users[0].mcm_emb.rows() == 0);
    for (u, want) in ds.users.iter().zip(&rows) {
        assert_eq!(u.tweet_emb.shape(), (u.tweets.len(), 768));
        for (r, w) in want.iter().enumerate() {
            assert!(u.tweet_emb.row(r).iter().zip(w).all(|(a, b)| *a == *b as f64));
        }
        let last = u.tweets.len() - 1;
        assert_eq!(u.tweets[0], u.tweets[last]);
        assert_eq!(u.tweet_emb.row(0), u.tweet_emb.row(last));
    }

    let mut again = Vec::new();
    write_dataset(&ds, &mut again).unwrap();
    assert_eq!(parse_dataset(std::str::from_utf8(&again).unwrap()).unwrap(), ds);

    let (tr, va, te) = split(&ds, 0).unwrap();
    assert!(!tr.is_empty() && !va.is_empty() && !te.is_empty());
    assert!(ds.users.iter().all(|u| u.split.is_none()));
    let config = TrainConfig {
        epochs: 3,
        batch_size: 4,
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let out = train(&tr, &va, &config).unwrap();
    assert!(out.history.rows.iter().all(|r| r.train_loss.is_finite()));
    let e = evaluate(&out.model, &te, config.cap).unwrap();
    assert!(e.mean_loss.is_finite());
}

#[test]
fn wrong_width_row_is_rejected_with_line() {
    let (text, _) = exporter_file();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let short = b64(&[0.0f32; 767]);
    let mut v: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    v["tweet_emb"][0] = short.into();
    lines[3] = v.to_string();
    match parse_dataset(&lines.join("\n")) {
        Err(HanError::Parse { line, message, .. }) => {
            assert_eq!(line, 4);
            assert!(message.contains("d=768"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}
