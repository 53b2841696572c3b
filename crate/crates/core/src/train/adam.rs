use std::collections::BTreeMap;

use crate::autodiff::{Gradients, ParamId, Parameterized};
use crate::error::{HanError, Result};
use crate::tensor::Mat;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment buffers, created lazily per parameter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    m: BTreeMap<ParamId, Mat>,
    v: BTreeMap<ParamId, Mat>,
    step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update with decoupled weight decay
/// (`p ← p − lr·wd·p`, then the Adam delta). Parameters without a gradient
/// entry are treated as having a zero gradient.
///
/// Nothing is modified when any gradient is non-finite or mis-shaped.
pub fn adam_step<M: Parameterized + ?Sized>(
    model: &mut M,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    for p in model.params() {
        if let Some(g) = grads.get(p.id) {
            if g.shape() != p.value.shape() {
                return Err(HanError::Dimension {
                    op: "adam_step",
                    left: p.value.shape(),
                    right: g.shape(),
                });
            }
            if !g.is_finite() {
                return Err(HanError::NanGradient(p.name.clone()));
            }
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for p in model.params_mut() {
        let (rows, cols) = p.value.shape();
        let m = state.m.entry(p.id).or_insert_with(|| Mat::zeros(rows, cols));
        let v = state.v.entry(p.id).or_insert_with(|| Mat::zeros(rows, cols));
        let g = grads.get(p.id);
        for i in 0..p.value.len() {
            let gi = g.map_or(0.0, |g| g.data()[i]);
            let mi = BETA1 * m.data()[i] + (1.0 - BETA1) * gi;
            let vi = BETA2 * v.data()[i] + (1.0 - BETA2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let x = &mut p.value.data_mut()[i];
            *x -= lr * weight_decay * *x;
            *x -= lr * (mi / c1) / ((vi / c2).sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}
