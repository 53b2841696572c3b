use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::head::UserInputs;
use crate::tensor::Mat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for SplitTag {
    type Err = HanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            other => Err(HanError::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// One user: label, texts and the matching embedding rows.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    /// 1 = depressed.
    pub label: u8,
    pub tweets: Vec<String>,
    pub mcms: Vec<String>,
    /// `tweets.len() x d`.
    pub tweet_emb: Mat,
    /// `mcms.len() x d`.
    pub mcm_emb: Mat,
    pub split: Option<SplitTag>,
}

impl UserRecord {
    /// Unpadded inputs: every stored row is visible.
    pub fn inputs<'u>(&'u self, tweet_mask: &'u [bool], mcm_mask: &'u [bool]) -> UserInputs<'u> {
        UserInputs {
            user_id: &self.user_id,
            tweets: &self.tweet_emb,
            tweet_mask,
            mcms: &self.mcm_emb,
            mcm_mask,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(HanError::InvalidArgument(format!("user {}: {msg}", self.user_id)));
        if self.label > 1 {
            return Err(HanError::InvalidLabel(self.label as i64));
        }
        if self.tweet_emb.rows() != self.tweets.len() || self.mcm_emb.rows() != self.mcms.len() {
            return bad(format!(
                "{} tweets / {} mcms but {} / {} embedding rows",
                self.tweets.len(),
                self.mcms.len(),
                self.tweet_emb.rows(),
                self.mcm_emb.rows()
            ));
        }
        if self.tweet_emb.cols() != d || self.mcm_emb.cols() != d {
            return bad(format!(
                "embedding width {}/{} differs from dataset d={d}",
                self.tweet_emb.cols(),
                self.mcm_emb.cols()
            ));
        }
        if !self.tweet_emb.is_finite() || !self.mcm_emb.is_finite() {
            return bad("non-finite embedding".into());
        }
        Ok(())
    }
}

/// A set of users sharing one embedding width.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub d: usize,
    pub users: Vec<UserRecord>,
}

impl Dataset {
    /// Validates ids, labels, shapes and finiteness.
    pub fn new(d: usize, users: Vec<UserRecord>) -> Result<Self> {
        if d == 0 {
            return Err(HanError::InvalidArgument("embedding width d must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for u in &users {
            if !seen.insert(u.user_id.as_str()) {
                return Err(HanError::InvalidArgument(format!("duplicate user id {}", u.user_id)));
            }
            u.validate(d)?;
        }
        Ok(Dataset { d, users })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Users carrying the given split tag.
    pub fn tagged(&self, tag: SplitTag) -> Dataset {
        Dataset {
            d: self.d,
            users: self.users.iter().filter(|u| u.split == Some(tag)).cloned().collect(),
        }
    }

    pub fn has_split_tags(&self) -> bool {
        !self.users.is_empty() && self.users.iter().all(|u| u.split.is_some())
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for u in &self.users {
            c[u.label as usize] += 1;
        }
        c
    }
}
