//! Branch fusion, prediction and the full user-level model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, NodeId, Param, ParamAllocator, Parameterized, Tape};
use crate::encoder::{encode_on_tape, AttentionTrace, Branch, Dropout, HanEncoderState, LinearParams};
use crate::error::{HanError, Result};
use crate::tensor::Mat;

/// Probabilities are clamped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Three output FNNs: two width-preserving ReLU layers and a projection to
/// the two labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub fnn1: LinearParams,
    pub fnn2: LinearParams,
    pub fnn3: LinearParams,
}

impl ClassifierParams {
    pub fn init(alloc: &mut ParamAllocator, width: usize, rng: &mut impl Rng) -> Self {
        ClassifierParams {
            fnn1: LinearParams::init(alloc, "head.fnn1", width, width, rng),
            fnn2: LinearParams::init(alloc, "head.fnn2", width, width, rng),
            fnn3: LinearParams::init(alloc, "head.fnn3", width, 2, rng),
        }
    }

    pub fn width(&self) -> usize {
        self.fnn1.weight.value.rows()
    }

    /// Records the head on `tape`; returns the probability row.
    pub fn forward_on_tape<'a>(&'a self, tape: &mut Tape<'a>, input: NodeId) -> Result<NodeId> {
        let h = self.fnn1.forward(tape, input)?;
        let h = tape.relu(h)?;
        let h = self.fnn2.forward(tape, h)?;
        let h = tape.relu(h)?;
        let logits = self.fnn3.forward(tape, h)?;
        tape.softmax_masked(logits, &[true, true])
    }
}

impl Parameterized for ClassifierParams {
    fn params(&self) -> Vec<&Param> {
        vec![
            &self.fnn1.weight,
            &self.fnn1.bias,
            &self.fnn2.weight,
            &self.fnn2.bias,
            &self.fnn3.weight,
            &self.fnn3.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.fnn1.weight,
            &mut self.fnn1.bias,
            &mut self.fnn2.weight,
            &mut self.fnn2.bias,
            &mut self.fnn3.weight,
            &mut self.fnn3.bias,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Index 1 is the depressed class.
    pub probs: [f64; 2],
    pub label: u8,
    pub loss: Option<f64>,
}

impl Prediction {
    fn from_probs(probs: &[f64]) -> Self {
        let probs = [probs[0], probs[1]];
        // exact ties resolve to the negative class
        let label = u8::from(probs[1] > probs[0]);
        Prediction {
            probs,
            label,
            loss: None,
        }
    }
}

/// `h = ReLU(FNN2(ReLU(FNN1(v_t ⊕ v_c))))`, `probs = softmax(FNN3(h))`.
pub fn forward(v_t: &Mat, v_c: Option<&Mat>, params: &ClassifierParams) -> Result<Prediction> {
    let input = match v_c {
        Some(v_c) => v_t.hstack(v_c)?,
        None => v_t.clone(),
    };
    if input.rows() != 1 || input.cols() != params.width() {
        return Err(HanError::Dimension {
            op: "classifier",
            left: input.shape(),
            right: params.fnn1.weight.value.shape(),
        });
    }
    let mut tape = Tape::new();
    let x = tape.constant(input)?;
    let probs = params.forward_on_tape(&mut tape, x)?;
    Ok(Prediction::from_probs(tape.value(probs)?.data()))
}

/// `−ln(max(probs[y], 1e-12))`.
pub fn cross_entropy(probs: &[f64], y: u8) -> Result<f64> {
    if y > 1 {
        return Err(HanError::InvalidLabel(y as i64));
    }
    if probs.len() != 2 {
        return Err(HanError::Dimension {
            op: "cross_entropy",
            left: (1, probs.len()),
            right: (1, 2),
        });
    }
    Ok(-probs[y as usize].max(PROB_FLOOR).ln())
}

/// Structural hyperparameters of a [`HanModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: usize,
    pub layers: usize,
    /// Drop the MCM branch entirely (the HAN-MCM ablation).
    pub ablate_mcm: bool,
}

/// MCM encoder plus the trainable row used when a user has no mappings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmBranch {
    pub encoder: HanEncoderState,
    pub null_embedding: Param,
}

/// Tweet encoder, optional MCM encoder and classifier head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HanModel {
    pub config: ModelConfig,
    pub tweet: HanEncoderState,
    pub mcm: Option<McmBranch>,
    pub head: ClassifierParams,
}

/// One user's (possibly padded) inputs.
#[derive(Clone, Copy, Debug)]
pub struct UserInputs<'u> {
    pub user_id: &'u str,
    pub tweets: &'u Mat,
    pub tweet_mask: &'u [bool],
    pub mcms: &'u Mat,
    pub mcm_mask: &'u [bool],
}

/// Everything a forward pass reports for one user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserOutput {
    pub prediction: Prediction,
    pub tweet_trace: AttentionTrace,
    /// `None` when the MCM branch is ablated.
    pub mcm_trace: Option<AttentionTrace>,
    /// The user had no mappings and the null embedding stood in.
    pub mcm_fallback: bool,
}

struct Recorded {
    probs: NodeId,
    tweet_trace: AttentionTrace,
    mcm_trace: Option<AttentionTrace>,
    mcm_fallback: bool,
}

impl HanModel {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut alloc = ParamAllocator::new();
        let tweet = HanEncoderState::init(&mut alloc, "tweet", config.layers, config.d, &mut rng)?;
        let mcm = if config.ablate_mcm {
            None
        } else {
            let encoder = HanEncoderState::init(&mut alloc, "mcm", config.layers, config.d, &mut rng)?;
            let row = (0..config.d).map(|_| rng.random_range(-0.1..0.1)).collect();
            Some(McmBranch {
                encoder,
                null_embedding: alloc.param("mcm.null_embedding", Mat::row_vector(row)),
            })
        };
        let width = if config.ablate_mcm { config.d } else { 2 * config.d };
        let head = ClassifierParams::init(&mut alloc, width, &mut rng);
        Ok(HanModel {
            config,
            tweet,
            mcm,
            head,
        })
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    fn record<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        user: &UserInputs<'a>,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<Recorded> {
        let d = self.d();
        if user.tweets.cols() != d || (user.mcms.rows() > 0 && user.mcms.cols() != d) {
            return Err(HanError::Incompatible(format!(
                "user {} has embedding width {}, model expects {d}",
                user.user_id,
                user.tweets.cols()
            )));
        }
        if user.tweet_mask.len() != user.tweets.rows() || user.mcm_mask.len() != user.mcms.rows() {
            return Err(HanError::Dimension {
                op: "user mask",
                left: (user.tweets.rows(), user.mcms.rows()),
                right: (user.tweet_mask.len(), user.mcm_mask.len()),
            });
        }
        if !user.tweet_mask.iter().any(|&m| m) {
            return Err(HanError::EmptyUser(user.user_id.to_string()));
        }

        let keys = tape.constant_ref(user.tweets)?;
        let (v_t, tweet_trace) =
            encode_on_tape(tape, keys, user.tweet_mask, &self.tweet, Branch::Tweet, dropout.as_deref_mut())?;

        let (input, mcm_trace, mcm_fallback) = match &self.mcm {
            None => (v_t, None, false),
            Some(branch) => {
                let fallback = !user.mcm_mask.iter().any(|&m| m);
                let (keys, mask) = if fallback {
                    (tape.param(&branch.null_embedding)?, &[true][..])
                } else {
                    (tape.constant_ref(user.mcms)?, user.mcm_mask)
                };
                let (v_c, trace) = encode_on_tape(tape, keys, mask, &branch.encoder, Branch::Mcm, dropout)?;
                (tape.concat_cols(v_t, v_c)?, Some(trace), fallback)
            }
        };
        let probs = self.head.forward_on_tape(tape, input)?;
        Ok(Recorded {
            probs,
            tweet_trace,
            mcm_trace,
            mcm_fallback,
        })
    }

    /// Inference-mode forward pass.
    pub fn predict_user(&self, user: &UserInputs<'_>) -> Result<UserOutput> {
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, user, None)?;
        Ok(UserOutput {
            prediction: Prediction::from_probs(tape.value(rec.probs)?.data()),
            tweet_trace: rec.tweet_trace,
            mcm_trace: rec.mcm_trace,
            mcm_fallback: rec.mcm_fallback,
        })
    }

    /// Cross-entropy loss of one user. `dropout = None` is inference mode.
    pub fn loss(&self, user: &UserInputs<'_>, label: u8, dropout: Option<&mut Dropout>) -> Result<f64> {
        if label > 1 {
            return Err(HanError::InvalidLabel(label as i64));
        }
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, user, dropout)?;
        let loss = tape.neg_log_pick(rec.probs, label as usize, PROB_FLOOR)?;
        Ok(tape.value(loss)?.item())
    }

    /// Loss and parameter gradients of one user.
    pub fn loss_and_grads(
        &self,
        user: &UserInputs<'_>,
        label: u8,
        dropout: Option<&mut Dropout>,
    ) -> Result<(Prediction, Gradients)> {
        if label > 1 {
            return Err(HanError::InvalidLabel(label as i64));
        }
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, user, dropout)?;
        let loss = tape.neg_log_pick(rec.probs, label as usize, PROB_FLOOR)?;
        let mut prediction = Prediction::from_probs(tape.value(rec.probs)?.data());
        prediction.loss = Some(tape.value(loss)?.item());
        // parameters never reached by this user still get (zero) buffers
        for p in self.params() {
            tape.param(p)?;
        }
        let grads = tape.backward(loss)?;
        Ok((prediction, grads))
    }
}

impl Parameterized for HanModel {
    fn params(&self) -> Vec<&Param> {
        let mut out = self.tweet.params();
        if let Some(m) = &self.mcm {
            out.extend(m.encoder.params());
            out.push(&m.null_embedding);
        }
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.tweet.params_mut();
        if let Some(m) = &mut self.mcm {
            out.extend(m.encoder.params_mut());
            out.push(&mut m.null_embedding);
        }
        out.extend(self.head.params_mut());
        out
    }
}
