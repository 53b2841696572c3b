//! Synthetic users for desk-scale experiments.
//!
//! Positive users draw "signal" tweet embeddings around `+separation/2 · e₀`,
//! negative users around `−separation/2 · e₀`, with unit variance. Optional
//! knobs make the task harder:
//!
//! - `signal_fraction < 1` turns the remaining tweets into class-independent
//!   distractors with standard deviation `distractor_scale`;
//! - `marker > 0` shifts signal tweets by `±marker · e₁` with a random sign
//!   per tweet, so they are recognizable only through `|x·e₁|`.
//!
//! All values are rounded to `f32` so generated datasets round-trip through
//! the file format exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::record::{Dataset, UserRecord};
use crate::error::{HanError, Result};
use crate::tensor::Mat;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub d: usize,
    pub separation: f64,
    /// MCM embeddings carry the class mean; otherwise they are pure noise.
    pub mcm_signal: bool,
    pub seed: u64,
    pub tweets_per_user: (usize, usize),
    pub mcms_per_user: (usize, usize),
    /// Class separation used for MCM embeddings when `mcm_signal` is set.
    pub mcm_separation: f64,
    pub signal_fraction: f64,
    pub distractor_scale: f64,
    pub marker: f64,
}

impl SynthConfig {
    pub fn new(n_users: usize, d: usize, separation: f64, mcm_signal: bool, seed: u64) -> Self {
        SynthConfig {
            n_users,
            d,
            separation,
            mcm_signal,
            seed,
            tweets_per_user: (5, 30),
            mcms_per_user: (0, 10),
            mcm_separation: separation,
            signal_fraction: 1.0,
            distractor_scale: 1.0,
            marker: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HanError::InvalidArgument(format!("synth: {m}")));
        if self.n_users < 4 {
            return bad("n_users must be >= 4");
        }
        if self.d < 2 {
            return bad("d must be >= 2");
        }
        if !(self.separation >= 0.0) || !(self.mcm_separation >= 0.0) {
            return bad("separation must be >= 0");
        }
        let (t0, t1) = self.tweets_per_user;
        let (m0, m1) = self.mcms_per_user;
        if t0 == 0 || t0 > t1 || m0 > m1 {
            return bad("invalid per-user count range");
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) || !(self.distractor_scale >= 0.0) || !(self.marker >= 0.0) {
            return bad("invalid signal/distractor settings");
        }
        Ok(())
    }
}

fn noise_row(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn to_mat(rows: Vec<Vec<f64>>, d: usize) -> Mat {
    let n = rows.len();
    let data = rows.into_iter().flatten().map(|v| v as f32 as f64).collect();
    Mat::from_vec(n, d, data).expect("rows have width d")
}

/// Generates a balanced synthetic dataset, deterministic in `config.seed`.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let d = config.d;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut users = Vec::with_capacity(config.n_users);
    for i in 0..config.n_users {
        let label = (i % 2) as u8;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let n = rng.random_range(config.tweets_per_user.0..=config.tweets_per_user.1);
        let s = rng.random_range(config.mcms_per_user.0..=config.mcms_per_user.1);
        let n_signal = ((n as f64 * config.signal_fraction).round() as usize).clamp(1, n);

        let mut tweet_rows = Vec::with_capacity(n);
        for j in 0..n {
            if j < n_signal {
                let mut row = noise_row(&mut rng, d, 1.0);
                row[0] += sign * config.separation / 2.0;
                if config.marker > 0.0 {
                    let flip = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    row[1] += flip * config.marker;
                }
                tweet_rows.push(row);
            } else {
                tweet_rows.push(noise_row(&mut rng, d, config.distractor_scale));
            }
        }
        // signal tweets are not clustered at the front
        for j in (1..n).rev() {
            let k = rng.random_range(0..=j);
            tweet_rows.swap(j, k);
        }

        let mcm_rows: Vec<Vec<f64>> = (0..s)
            .map(|_| {
                let mut row = noise_row(&mut rng, d, 1.0);
                if config.mcm_signal {
                    row[0] += sign * config.mcm_separation / 2.0;
                }
                row
            })
            .collect();
        let mcms = (0..s)
            .map(|_| format!("CONCEPT{} IS CONCEPT{}", rng.random_range(0..50), rng.random_range(0..50)))
            .collect();

        users.push(UserRecord {
            user_id: format!("synth-{i:05}"),
            label,
            tweets: (0..n).map(|j| format!("synthetic tweet {j} of user {i}")).collect(),
            mcms,
            tweet_emb: to_mat(tweet_rows, d),
            mcm_emb: to_mat(mcm_rows, d),
            split: None,
        });
    }
    Dataset::new(d, users)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let c = SynthConfig::new(20, 4, 2.0, true, 9);
        assert_eq!(synth_generate(&c).unwrap(), synth_generate(&c).unwrap());
        let other = SynthConfig { seed: 10, ..c.clone() };
        assert_ne!(synth_generate(&c).unwrap(), synth_generate(&other).unwrap());
    }

    #[test]
    fn shapes_and_balance() {
        let ds = synth_generate(&SynthConfig::new(40, 6, 4.0, false, 1)).unwrap();
        assert_eq!(ds.label_counts(), [20, 20]);
        for u in &ds.users {
            assert!((5..=30).contains(&u.tweets.len()));
            assert!(u.mcms.len() <= 10);
            assert_eq!(u.tweet_emb.cols(), 6);
            assert!(u.tweet_emb.data().iter().all(|&v| v as f32 as f64 == v));
        }
    }

    #[test]
    fn invalid_sizes() {
        assert!(synth_generate(&SynthConfig::new(3, 4, 1.0, false, 0)).is_err());
        assert!(synth_generate(&SynthConfig::new(10, 1, 1.0, false, 0)).is_err());
        assert!(synth_generate(&SynthConfig::new(10, 4, -1.0, false, 0)).is_err());
    }
}
