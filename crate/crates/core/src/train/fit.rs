use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::metrics::Metrics;
use crate::autodiff::Gradients;
use crate::data::{pad_to_longest, Dataset, UserRecord};
use crate::encoder::Dropout;
use crate::error::{HanError, Result};
use crate::head::{cross_entropy, HanModel, ModelConfig, Prediction, UserOutput};

/// SplitMix64 finalizer, used to derive independent dropout streams.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn dropout_seed(seed: u64, step: usize, user: usize) -> u64 {
    mix(mix(seed ^ 0x9e37_79b9_7f4a_7c15) ^ mix(step as u64) ^ mix((user as u64) << 32 | 0xa5a5))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub epoch: usize,
    pub train_loss: f64,
    /// Set on the last step of each epoch.
    pub val_f1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    /// Mean training loss of every epoch, in order.
    pub fn epoch_mean_losses(&self) -> Vec<f64> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for r in &self.rows {
            if out.len() < r.epoch {
                out.resize(r.epoch, (0.0, 0));
            }
            let e = &mut out[r.epoch - 1];
            e.0 += r.train_loss;
            e.1 += 1;
        }
        out.into_iter().map(|(s, n)| s / n.max(1) as f64).collect()
    }

    /// CSV with header `step,epoch,train_loss,val_f1`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "step,epoch,train_loss,val_f1")?;
        for r in &self.rows {
            let f1 = r.val_f1.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.step, r.epoch, r.train_loss, f1)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| HanError::io(path, e))?;
        fs::write(path, buf).map_err(|e| HanError::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The model of the epoch with the best validation F1.
    pub model: HanModel,
    pub history: History,
    /// 1-based.
    pub best_epoch: usize,
    pub best_val: Option<Evaluation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub mean_loss: f64,
}

/// Inference for one stored user, truncated to `cap` tweets and mappings.
pub fn predict_record(model: &HanModel, user: &UserRecord, cap: usize) -> Result<UserOutput> {
    let batch = pad_to_longest(&[user], cap, model.d())?;
    model.predict_user(&batch.inputs(0))
}

/// Predictions for every user, in dataset order.
pub fn predict_dataset(model: &HanModel, dataset: &Dataset, cap: usize) -> Result<Vec<Prediction>> {
    check_width(model, dataset)?;
    dataset
        .users
        .par_iter()
        .map(|u| predict_record(model, u, cap).map(|o| o.prediction))
        .collect()
}

/// Deterministic evaluation: argmax labels and positive-class metrics.
pub fn evaluate(model: &HanModel, dataset: &Dataset, cap: usize) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(HanError::EmptyDataset);
    }
    let preds = predict_dataset(model, dataset, cap)?;
    let gold: Vec<u8> = dataset.users.iter().map(|u| u.label).collect();
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let mut loss = 0.0;
    for (p, &y) in preds.iter().zip(&gold) {
        loss += cross_entropy(&p.probs, y)?;
    }
    Ok(Evaluation {
        metrics: Metrics::from_labels(&labels, &gold)?,
        mean_loss: loss / gold.len() as f64,
    })
}

fn check_width(model: &HanModel, dataset: &Dataset) -> Result<()> {
    if dataset.d != model.d() {
        return Err(HanError::Incompatible(format!(
            "dataset width {} but model width {}",
            dataset.d,
            model.d()
        )));
    }
    Ok(())
}

fn better(candidate: &Evaluation, best: &Evaluation) -> bool {
    candidate.metrics.f1 > best.metrics.f1
        || (candidate.metrics.f1 == best.metrics.f1 && candidate.mean_loss < best.mean_loss)
}

/// Mini-batch training with Adam.
///
/// Each epoch visits the training users in a seeded random order. A step
/// pads its batch to the longest user, averages the per-user cross-entropy
/// and gradients, and applies one Adam update. After each epoch the model
/// is scored on `val`; the best epoch by F1 (then lower loss) is returned.
/// With an empty `val` or zero epochs the final model is returned.
///
/// Per-user work runs in parallel; gradients are summed in batch order, so
/// results do not depend on the thread count.
pub fn train(train: &Dataset, val: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(HanError::EmptyDataset);
    }
    if !val.is_empty() && val.d != train.d {
        return Err(HanError::Incompatible(format!("train width {} but val width {}", train.d, val.d)));
    }
    let mut model = HanModel::init(
        ModelConfig {
            d: train.d,
            layers: config.layers,
            ablate_mcm: config.ablate_mcm,
        },
        config.seed,
    )?;
    let mut adam = AdamState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(Evaluation, HanModel, usize)> = None;
    let mut since_best = 0;
    let mut step = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let users: Vec<&UserRecord> = chunk.iter().map(|&i| &train.users[i]).collect();
            let batch = pad_to_longest(&users, config.cap, train.d)?;
            let results: Vec<(Prediction, Gradients)> = (0..batch.len())
                .into_par_iter()
                .map(|b| {
                    let mut dropout = Dropout::new(config.dropout, dropout_seed(config.seed, step, b))?;
                    model.loss_and_grads(&batch.inputs(b), batch.labels[b], Some(&mut dropout))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads = Gradients::default();
            let mut loss = 0.0;
            for (pred, g) in &results {
                loss += pred.loss.unwrap_or(f64::NAN) * scale;
                grads.accumulate(g, scale);
            }
            if !loss.is_finite() {
                return Err(HanError::Divergence(step));
            }
            adam_step(&mut model, &grads, &mut adam, config.lr, config.weight_decay)?;
            history.rows.push(HistoryRow {
                step,
                epoch,
                train_loss: loss,
                val_f1: None,
            });
        }

        if val.is_empty() {
            best = None;
            continue;
        }
        let eval = evaluate(&model, val, config.cap)?;
        if let Some(last) = history.rows.last_mut() {
            last.val_f1 = Some(eval.metrics.f1);
        }
        if best.as_ref().is_none_or(|(b, _, _)| better(&eval, b)) {
            best = Some((eval, model.clone(), epoch));
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }

    let last_epoch = history.rows.last().map_or(0, |r| r.epoch);
    Ok(match best {
        Some((eval, m, epoch)) => TrainOutcome {
            model: m,
            history,
            best_epoch: epoch,
            best_val: Some(eval),
        },
        None => TrainOutcome {
            model,
            history,
            best_epoch: last_epoch,
            best_val: None,
        },
    })
}

pub fn save_model(model: &HanModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(model).map_err(|e| HanError::InvalidArgument(format!("model: {e}")))?;
    fs::write(path, text).map_err(|e| HanError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HanModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HanError::Parse {
        line: e.line(),
        offset: e.column().saturating_sub(1),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Parameterized;
    use crate::data::{synth_generate, SynthConfig};

    fn tiny(seed: u64) -> Dataset {
        let mut c = SynthConfig::new(16, 4, 4.0, true, seed);
        c.tweets_per_user = (2, 6);
        c.mcms_per_user = (0, 3);
        synth_generate(&c).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            epochs: 3,
            lr: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let ds = tiny(1);
        let c = TrainConfig {
            lr: 0.0,
            ..cfg()
        };
        let out = train(&ds, &Dataset { d: 4, users: vec![] }, &c).unwrap();
        let init = HanModel::init(
            ModelConfig {
                d: 4,
                layers: 2,
                ablate_mcm: false,
            },
            c.seed,
        )
        .unwrap();
        let a: Vec<u64> = out.model.params().iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits())).collect();
        let b: Vec<u64> = init.params().iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits())).collect();
        assert_eq!(a, b);
        assert_eq!(out.history.rows.len(), 12);
    }

    #[test]
    fn same_seed_same_history() {
        let (tr, va) = (tiny(2), tiny(3));
        let a = train(&tr, &va, &cfg()).unwrap();
        let b = train(&tr, &va, &cfg()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let epochs_with_f1 = a.history.rows.iter().filter(|r| r.val_f1.is_some()).count();
        assert_eq!(epochs_with_f1, 3);
    }

    #[test]
    fn history_csv() {
        let h = History {
            rows: vec![
                HistoryRow {
                    step: 1,
                    epoch: 1,
                    train_loss: 0.5,
                    val_f1: None,
                },
                HistoryRow {
                    step: 2,
                    epoch: 1,
                    train_loss: 0.25,
                    val_f1: Some(1.0),
                },
            ],
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,epoch,train_loss,val_f1\n1,1,0.5,\n2,1,0.25,1\n");
        assert_eq!(h.epoch_mean_losses(), [0.375]);
    }

    #[test]
    fn empty_inputs() {
        let empty = Dataset { d: 4, users: vec![] };
        assert!(matches!(train(&empty, &empty, &cfg()), Err(HanError::EmptyDataset)));
        let m = HanModel::init(
            ModelConfig {
                d: 4,
                layers: 1,
                ablate_mcm: false,
            },
            0,
        )
        .unwrap();
        assert!(matches!(evaluate(&m, &empty, 200), Err(HanError::EmptyDataset)));
        assert!(matches!(evaluate(&m, &Dataset { d: 5, users: vec![] }, 200), Err(HanError::EmptyDataset)));
    }

    #[test]
    fn model_file_round_trip() {
        let m = train(&tiny(4), &tiny(5), &cfg()).unwrap().model;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
    }
}
