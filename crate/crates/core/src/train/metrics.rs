use serde::Serialize;

use crate::error::{HanError, Result};

/// Binary classification scores with respect to the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Zero denominators give 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<Self> {
        let total = tp + fp + fn_ + tn;
        if total == 0 {
            return Err(HanError::EmptyDataset);
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Ok(Metrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy: ratio(tp + tn, total),
        })
    }

    pub fn from_labels(predicted: &[u8], gold: &[u8]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(HanError::InvalidArgument(format!(
                "{} predictions for {} labels",
                predicted.len(),
                gold.len()
            )));
        }
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (1, 1) => tp += 1,
                (1, _) => fp += 1,
                (_, 1) => fn_ += 1,
                _ => tn += 1,
            }
        }
        Self::from_counts(tp, fp, fn_, tn)
    }
}
