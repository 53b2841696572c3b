use serde::Serialize;

use super::config::TrainConfig;
use super::fit::{evaluate, train};
use super::metrics::Metrics;
use crate::data::Dataset;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub layers: usize,
    pub val: Metrics,
    pub test: Metrics,
}

/// Trains one model per layer count with otherwise identical settings.
pub fn layer_sweep(
    train_set: &Dataset,
    val: &Dataset,
    test: &Dataset,
    config: &TrainConfig,
    layers: &[usize],
) -> Result<Vec<SweepRow>> {
    layers
        .iter()
        .map(|&l| {
            let cfg = TrainConfig {
                layers: l,
                ..config.clone()
            };
            let model = train(train_set, val, &cfg)?.model;
            Ok(SweepRow {
                layers: l,
                val: evaluate(&model, val, cfg.cap)?.metrics,
                test: evaluate(&model, test, cfg.cap)?.metrics,
            })
        })
        .collect()
}
