use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_CAP;
use crate::error::{HanError, Result};

/// Training hyperparameters. The embedding width comes from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub layers: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Tweets and mappings kept per user.
    pub cap: usize,
    pub ablate_mcm: bool,
    /// Stop after this many epochs without a better validation F1.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 2,
            batch_size: 64,
            lr: 1e-4,
            weight_decay: 1e-5,
            dropout: 0.2,
            epochs: 50,
            seed: 0,
            cap: DEFAULT_CAP,
            ablate_mcm: false,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HanError::InvalidArgument(m));
        if self.layers == 0 || self.batch_size == 0 || self.cap == 0 {
            return bad("layers, batch_size and cap must be >= 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("lr {} and weight_decay {} must be finite and >= 0", self.lr, self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.patience == Some(0) {
            return bad("patience must be >= 1".into());
        }
        Ok(())
    }

    /// Reads `key = value` pairs; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| HanError::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&fs::read_to_string(path).map_err(|e| HanError::io(path, e))?)
    }
}
