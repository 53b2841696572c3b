//! Checks shared by the dedicated test files and the acceptance target.

use hankit::data::{pad_to_longest, UserRecord};
use hankit::head::{HanModel, ModelConfig, UserInputs};
use hankit::{finite_diff_check, Mat, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss_ref, rows_of, user};

pub fn all_true(n: usize) -> Vec<bool> {
    vec![true; n]
}

pub fn probs_of(model: &HanModel, u: &UserRecord) -> [f64; 2] {
    let (tm, mm) = (all_true(u.tweets.len()), all_true(u.mcms.len()));
    model.predict_user(&u.inputs(&tm, &mm)).unwrap().prediction.probs
}

#[derive(Debug, Default)]
pub struct GradSummary {
    pub cases: usize,
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
    pub skipped: usize,
    /// Largest gap between the model's loss and the reference loss.
    pub max_loss_gap: f64,
}

/// Central differences against tape gradients at d=8, l=2 and up to five
/// tweets and mappings. Every seed runs the full model with and without
/// mappings, plus the ablated model.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Result<GradSummary> {
    let d = 8;
    let mut s = GradSummary::default();
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919) + 11);
        for (ablate, with_mcms) in [(false, true), (false, false), (true, true)] {
            let mut model = HanModel::init(ModelConfig { d, layers: 2, ablate_mcm: ablate }, seed)?;
            let n_t = rng.random_range(1..=5);
            let n_m = if with_mcms { rng.random_range(1..=5) } else { 0 };
            let label = rng.random_range(0..=1u8);
            let u = user("g", label, n_t, n_m, d, &mut rng);
            let (tm, mm) = (all_true(n_t), all_true(n_m));
            let inputs = u.inputs(&tm, &mm);
            let (pred, grads) = model.loss_and_grads(&inputs, label, None)?;
            let loss = pred.loss.expect("training forward reports loss");
            let gap = (loss - loss_ref(&model, &rows_of(&u.tweet_emb), &rows_of(&u.mcm_emb), label)).abs();
            s.max_loss_gap = s.max_loss_gap.max(gap);
            let report = finite_diff_check(&mut model, |m: &HanModel| m.loss(&inputs, label, None), &grads, 1e-4)?;
            s.cases += 1;
            s.checked += report.checked;
            s.skipped += report.skipped;
            if report.max_rel_error >= s.max_rel_error {
                s.max_rel_error = report.max_rel_error;
                s.worst = format!("seed {seed} ablate {ablate} mcms {with_mcms}: {:?}", report.worst);
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Default)]
pub struct InvarianceSummary {
    pub cases: usize,
    pub max_permutation_gap: f64,
    pub max_sum_error: f64,
    pub max_padding_gap: f64,
}

fn permute(m: &Mat, order: &[usize]) -> Mat {
    m.select_rows(order)
}

/// Appends `extra` random rows and returns the grown matrix and its mask.
fn with_masked_rows(m: &Mat, extra: usize, d: usize, rng: &mut impl Rng) -> (Mat, Vec<bool>) {
    let noise = super::random_rows(extra, d, rng).map(|v| v * 50.0);
    let grown = if m.rows() == 0 { noise } else { m.vstack(&noise).unwrap() };
    let mut mask = all_true(m.rows());
    mask.extend(std::iter::repeat_n(false, extra));
    (grown, mask)
}

/// One random user and model: permutation, weight sums and masked padding.
pub fn invariance_case(seed: u64, summary: &mut InvarianceSummary) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let d = rng.random_range(2..=12);
    let layers = rng.random_range(1..=3);
    let ablate = rng.random_bool(0.2);
    let model = HanModel::init(ModelConfig { d, layers, ablate_mcm: ablate }, seed)?;
    let n_t = rng.random_range(1..=8);
    let n_m = rng.random_range(0..=8);
    let u = user("inv", 0, n_t, n_m, d, &mut rng);
    let base = probs_of(&model, &u);

    let mut pt: Vec<usize> = (0..n_t).collect();
    let mut pm: Vec<usize> = (0..n_m).collect();
    pt.shuffle(&mut rng);
    pm.shuffle(&mut rng);
    let mut shuffled = u.clone();
    shuffled.tweet_emb = permute(&u.tweet_emb, &pt);
    shuffled.mcm_emb = permute(&u.mcm_emb, &pm);
    let p = probs_of(&model, &shuffled);
    for c in 0..2 {
        summary.max_permutation_gap = summary.max_permutation_gap.max((p[c] - base[c]).abs());
    }

    let (tm, mm) = (all_true(n_t), all_true(n_m));
    let out = model.predict_user(&u.inputs(&tm, &mm))?;
    let traces = std::iter::once(&out.tweet_trace).chain(out.mcm_trace.as_ref());
    for trace in traces {
        for layer in &trace.layers {
            let sum: f64 = layer.iter().sum();
            summary.max_sum_error = summary.max_sum_error.max((sum - 1.0).abs());
        }
    }

    let (tweets, tweet_mask) = with_masked_rows(&u.tweet_emb, rng.random_range(1..=6), d, &mut rng);
    let (mcms, mcm_mask) = with_masked_rows(&u.mcm_emb, rng.random_range(1..=6), d, &mut rng);
    let padded = UserInputs {
        user_id: "inv",
        tweets: &tweets,
        tweet_mask: &tweet_mask,
        mcms: &mcms,
        mcm_mask: &mcm_mask,
    };
    let padded_out = model.predict_user(&padded)?;
    for c in 0..2 {
        let gap = (padded_out.prediction.probs[c] - base[c]).abs();
        summary.max_padding_gap = summary.max_padding_gap.max(gap);
    }
    for (a, b) in padded_out.tweet_trace.layers.iter().zip(&out.tweet_trace.layers) {
        summary.max_padding_gap = summary.max_padding_gap.max(a[n_t..].iter().fold(0.0, |m, v| m.max(v.abs())));
        for (x, y) in a.iter().zip(b) {
            summary.max_padding_gap = summary.max_padding_gap.max((x - y).abs());
        }
    }

    // Batch padding: the same user next to a longer one.
    let long = user("long", 1, n_t + 4, n_m + 3, d, &mut rng);
    let batch = pad_to_longest(&[&u, &long], 200, d)?;
    let batched = model.predict_user(&batch.inputs(0))?;
    for c in 0..2 {
        let gap = (batched.prediction.probs[c] - base[c]).abs();
        summary.max_padding_gap = summary.max_padding_gap.max(gap);
    }
    summary.cases += 1;
    Ok(())
}

pub fn invariance_suite(seeds: std::ops::Range<u64>) -> Result<InvarianceSummary> {
    let mut s = InvarianceSummary::default();
    for seed in seeds {
        invariance_case(seed, &mut s)?;
    }
    Ok(s)
}
