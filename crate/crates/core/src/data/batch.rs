use super::record::UserRecord;
use crate::error::{HanError, Result};
use crate::head::UserInputs;
use crate::tensor::Mat;

/// Maximum tweets and MCMs kept per user.
pub const DEFAULT_CAP: usize = 200;

/// Zero-padded per-user inputs with validity masks.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    pub user_ids: Vec<String>,
    /// One `rows x d` matrix per user.
    pub tweets: Vec<Mat>,
    pub tweet_mask: Vec<Vec<bool>>,
    pub mcms: Vec<Mat>,
    pub mcm_mask: Vec<Vec<bool>>,
    pub labels: Vec<u8>,
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self, b: usize) -> UserInputs<'_> {
        UserInputs {
            user_id: &self.user_ids[b],
            tweets: &self.tweets[b],
            tweet_mask: &self.tweet_mask[b],
            mcms: &self.mcms[b],
            mcm_mask: &self.mcm_mask[b],
        }
    }
}

fn pad(m: &Mat, rows: usize, keep: usize) -> (Mat, Vec<bool>) {
    let mut out = Mat::zeros(rows, m.cols());
    for r in 0..keep {
        out.row_mut(r).copy_from_slice(m.row(r));
    }
    let mask = (0..rows).map(|r| r < keep).collect();
    (out, mask)
}

fn build(users: &[&UserRecord], cap: usize, d: usize, fixed: bool) -> Result<PaddedBatch> {
    if cap == 0 {
        return Err(HanError::InvalidArgument("cap must be >= 1".into()));
    }
    let mut batch = PaddedBatch {
        user_ids: Vec::with_capacity(users.len()),
        tweets: Vec::with_capacity(users.len()),
        tweet_mask: Vec::with_capacity(users.len()),
        mcms: Vec::with_capacity(users.len()),
        mcm_mask: Vec::with_capacity(users.len()),
        labels: Vec::with_capacity(users.len()),
    };
    let longest = |f: fn(&UserRecord) -> usize| users.iter().map(|u| f(u).min(cap)).max().unwrap_or(0);
    let (tweet_rows, mcm_rows) = if fixed {
        (cap, cap)
    } else {
        (longest(|u| u.tweets.len()), longest(|u| u.mcms.len()))
    };
    for u in users {
        if u.tweet_emb.cols() != d || u.mcm_emb.cols() != d {
            return Err(HanError::Incompatible(format!(
                "user {} has width {}, batch expects {d}",
                u.user_id,
                u.tweet_emb.cols()
            )));
        }
        if u.tweet_emb.rows() == 0 {
            return Err(HanError::EmptyUser(u.user_id.clone()));
        }
        let (t, tm) = pad(&u.tweet_emb, tweet_rows, u.tweet_emb.rows().min(cap));
        let (m, mm) = pad(&u.mcm_emb, mcm_rows, u.mcm_emb.rows().min(cap));
        batch.user_ids.push(u.user_id.clone());
        batch.tweets.push(t);
        batch.tweet_mask.push(tm);
        batch.mcms.push(m);
        batch.mcm_mask.push(mm);
        batch.labels.push(u.label);
    }
    Ok(batch)
}

/// Keeps the first `cap` tweets and MCMs of each user (stored order) and
/// zero-pads every user to exactly `cap` rows.
pub fn pad_truncate(users: &[&UserRecord], cap: usize, d: usize) -> Result<PaddedBatch> {
    build(users, cap, d, true)
}

/// Same truncation as [`pad_truncate`], but pads only up to the longest
/// (capped) user in the batch.
pub fn pad_to_longest(users: &[&UserRecord], cap: usize, d: usize) -> Result<PaddedBatch> {
    build(users, cap, d, false)
}
