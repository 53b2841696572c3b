//! Reference computations written against plain vectors, independent of the
//! tape, plus small data builders shared by the integration tests.

#![allow(dead_code)]

use hankit::data::{Dataset, UserRecord};
use hankit::encoder::{HanEncoderState, LayerNormParams, LinearParams};
use hankit::head::HanModel;
use hankit::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Row = Vec<f64>;

fn dense(x: &[f64], lin: &LinearParams) -> Row {
    let w = &lin.weight.value;
    let b = lin.bias.value.data();
    (0..w.cols())
        .map(|j| b[j] + (0..w.rows()).map(|i| x[i] * w.get(i, j)).sum::<f64>())
        .collect()
}

fn relu(x: Row) -> Row {
    x.into_iter().map(|v| v.max(0.0)).collect()
}

fn norm(x: &[f64], ln: &LayerNormParams) -> Row {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = (var + 1e-5).sqrt();
    let (g, b) = (ln.gain.value.data(), ln.bias.value.data());
    x.iter().enumerate().map(|(i, v)| (v - mean) / sd * g[i] + b[i]).collect()
}

pub fn softmax_over(logits: &[f64], mask: &[bool]) -> Row {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Row = logits.iter().zip(mask).map(|(&v, &m)| if m { (v - max).exp() } else { 0.0 }).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Final query and per-layer weights of one branch.
pub fn encode_ref(keys: &[Row], mask: &[bool], enc: &HanEncoderState) -> (Row, Vec<Row>) {
    let d = enc.d as f64;
    let mut q: Row = enc.v0.value.data().to_vec();
    let mut k: Vec<Row> = keys.to_vec();
    let mut trace = Vec::new();
    for layer in &enc.layers {
        let logits: Row = k.iter().map(|kr| kr.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / d.sqrt()).collect();
        let w = softmax_over(&logits, mask);
        let mut pooled = vec![0.0; q.len()];
        for (kr, &wj) in k.iter().zip(&w) {
            for (p, v) in pooled.iter_mut().zip(kr) {
                *p += wj * v;
            }
        }
        q = norm(&relu(dense(&pooled, &layer.fnn_query)), &layer.ln_query);
        k = k.iter().map(|kr| norm(&relu(dense(kr, &layer.fnn_key)), &layer.ln_key)).collect();
        trace.push(w);
    }
    (q, trace)
}

pub fn rows_of(m: &Mat) -> Vec<Row> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Class probabilities of the whole model for unpadded inputs.
pub fn probs_ref(model: &HanModel, tweets: &[Row], mcms: &[Row]) -> [f64; 2] {
    let (v_t, _) = encode_ref(tweets, &vec![true; tweets.len()], &model.tweet);
    let mut x = v_t;
    if let Some(branch) = &model.mcm {
        let v_c = if mcms.is_empty() {
            encode_ref(&[branch.null_embedding.value.data().to_vec()], &[true], &branch.encoder).0
        } else {
            encode_ref(mcms, &vec![true; mcms.len()], &branch.encoder).0
        };
        x.extend(v_c);
    }
    let h = relu(dense(&x, &model.head.fnn1));
    let h = relu(dense(&h, &model.head.fnn2));
    let p = softmax_over(&dense(&h, &model.head.fnn3), &[true, true]);
    [p[0], p[1]]
}

pub fn loss_ref(model: &HanModel, tweets: &[Row], mcms: &[Row], label: u8) -> f64 {
    -probs_ref(model, tweets, mcms)[label as usize].max(1e-12).ln()
}

pub fn random_rows(n: usize, d: usize, rng: &mut impl Rng) -> Mat {
    let data = (0..n * d).map(|_| rng.random_range(-1.5..1.5)).collect();
    Mat::from_vec(n, d, data).unwrap()
}

pub fn user(id: &str, label: u8, n_tweets: usize, n_mcms: usize, d: usize, rng: &mut impl Rng) -> UserRecord {
    UserRecord {
        user_id: id.to_string(),
        label,
        tweets: (0..n_tweets).map(|i| format!("tweet {i} of {id}")).collect(),
        mcms: (0..n_mcms).map(|i| format!("A{i} IS B{i}")).collect(),
        tweet_emb: random_rows(n_tweets, d, rng),
        mcm_emb: random_rows(n_mcms, d, rng),
        split: None,
    }
}

/// Random users with 1..=max_o tweets and 0..=max_o mappings.
pub fn random_dataset(n: usize, d: usize, max_o: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = (0..n)
        .map(|i| {
            let t = rng.random_range(1..=max_o);
            let m = rng.random_range(0..=max_o);
            user(&format!("u{i}"), (i % 2) as u8, t, m, d, &mut rng)
        })
        .collect();
    Dataset::new(d, users).unwrap()
}

/// Knee by exhaustive search: largest perpendicular distance from the
/// chord of the min-max normalized curve; the first index within 1e-12
/// of the maximum wins.
pub fn knee_brute_force(ys: &[f64]) -> Option<usize> {
    let n = ys.len();
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if n < 3 || hi == lo {
        return None;
    }
    let pts: Vec<(f64, f64)> = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| (i as f64 / (n - 1) as f64, (y - lo) / (hi - lo)))
        .collect();
    let (x0, y0) = pts[0];
    let (x1, y1) = pts[n - 1];
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let dists: Vec<f64> = pts
        .iter()
        .map(|&(x, y)| ((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0).abs() / len)
        .collect();
    let max = dists.iter().copied().fold(0.0, f64::max);
    if max <= 1e-12 {
        return None;
    }
    dists.iter().position(|&v| v >= max - 1e-12)
}
pub mod suites;
