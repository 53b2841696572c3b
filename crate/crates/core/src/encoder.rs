//! HAN encoder layers.
//!
//! One layer takes a query row `q` (1 x d) and a key matrix `K` (o x d):
//!
//! ```text
//! w  = softmax_masked(q·Kᵀ / sqrt(d))
//! q' = LN(ReLU(FNN_query(w·K)))
//! K' = LN(ReLU(FNN_key(K)))          (row-wise)
//! ```
//!
//! A stack of `l` layers starts from the trainable query `v0` and the input
//! embeddings; the final query is the branch representation and the per-layer
//! weights form the [`AttentionTrace`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Param, ParamAllocator, Parameterized, Tape};
use crate::error::{HanError, Result};
use crate::tensor::{self, Mat, LN_EPS};

/// Which input set a branch encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Tweet,
    Mcm,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Tweet => "tweet",
            Branch::Mcm => "mcm",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weight: Param,
    pub bias: Param,
}

impl LinearParams {
    /// Glorot-uniform weights, zero bias.
    pub fn init(alloc: &mut ParamAllocator, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
        LinearParams {
            weight: alloc.param(format!("{name}.weight"), Mat::from_vec(fan_in, fan_out, data).unwrap()),
            bias: alloc.param(format!("{name}.bias"), Mat::zeros(1, fan_out)),
        }
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: NodeId) -> Result<NodeId> {
        let w = tape.param(&self.weight)?;
        let b = tape.param(&self.bias)?;
        tape.linear(x, w, b)
    }

    fn push_params<'s>(&'s self, out: &mut Vec<&'s Param>) {
        out.push(&self.weight);
        out.push(&self.bias);
    }

    fn push_params_mut<'s>(&'s mut self, out: &mut Vec<&'s mut Param>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub gain: Param,
    pub bias: Param,
}

impl LayerNormParams {
    pub fn init(alloc: &mut ParamAllocator, name: &str, d: usize) -> Self {
        LayerNormParams {
            gain: alloc.param(format!("{name}.gain"), Mat::filled(1, d, 1.0)),
            bias: alloc.param(format!("{name}.bias"), Mat::zeros(1, d)),
        }
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: NodeId) -> Result<NodeId> {
        let g = tape.param(&self.gain)?;
        let b = tape.param(&self.bias)?;
        tape.layer_norm(x, g, b, LN_EPS)
    }
}

/// Parameters of one HAN layer. Trainable size is `2(d² + d) + 4d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HanLayerParams {
    pub fnn_query: LinearParams,
    pub fnn_key: LinearParams,
    pub ln_query: LayerNormParams,
    pub ln_key: LayerNormParams,
}

impl HanLayerParams {
    pub fn init(alloc: &mut ParamAllocator, name: &str, d: usize, rng: &mut impl Rng) -> Self {
        HanLayerParams {
            fnn_query: LinearParams::init(alloc, &format!("{name}.fnn_query"), d, d, rng),
            fnn_key: LinearParams::init(alloc, &format!("{name}.fnn_key"), d, d, rng),
            ln_query: LayerNormParams::init(alloc, &format!("{name}.ln_query"), d),
            ln_key: LayerNormParams::init(alloc, &format!("{name}.ln_key"), d),
        }
    }

    pub fn width(&self) -> usize {
        self.fnn_query.weight.value.rows()
    }
}

impl Parameterized for HanLayerParams {
    fn params(&self) -> Vec<&Param> {
        let mut out = Vec::with_capacity(8);
        self.fnn_query.push_params(&mut out);
        self.fnn_key.push_params(&mut out);
        out.extend([&self.ln_query.gain, &self.ln_query.bias, &self.ln_key.gain, &self.ln_key.bias]);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::with_capacity(8);
        self.fnn_query.push_params_mut(&mut out);
        self.fnn_key.push_params_mut(&mut out);
        out.extend([
            &mut self.ln_query.gain,
            &mut self.ln_query.bias,
            &mut self.ln_key.gain,
            &mut self.ln_key.bias,
        ]);
        out
    }
}

/// A stack of HAN layers plus the branch's trainable seed query `v0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HanEncoderState {
    pub layers: Vec<HanLayerParams>,
    pub v0: Param,
    pub d: usize,
}

impl HanEncoderState {
    pub fn init(alloc: &mut ParamAllocator, name: &str, layers: usize, d: usize, rng: &mut impl Rng) -> Result<Self> {
        if layers == 0 || d == 0 {
            return Err(HanError::InvalidArgument(format!(
                "encoder needs l >= 1 and d >= 1, got l={layers}, d={d}"
            )));
        }
        let layers = (0..layers)
            .map(|i| HanLayerParams::init(alloc, &format!("{name}.layer{i}"), d, rng))
            .collect();
        let v0 = (0..d).map(|_| rng.random_range(-0.1..0.1)).collect();
        Ok(HanEncoderState {
            layers,
            v0: alloc.param(format!("{name}.v0"), Mat::row_vector(v0)),
            d,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

impl Parameterized for HanEncoderState {
    fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.layers.iter().flat_map(|l| l.params()).collect();
        out.push(&self.v0);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        out.push(&mut self.v0);
        out
    }
}

/// Builds a standalone encoder, deterministic in `seed`.
pub fn init_encoder(layers: usize, d: usize, seed: u64) -> Result<HanEncoderState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    HanEncoderState::init(&mut ParamAllocator::new(), "encoder", layers, d, &mut rng)
}

/// Per-layer attention weights of one branch; masked positions hold 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub branch: Branch,
    pub layers: Vec<Vec<f64>>,
}

impl AttentionTrace {
    pub fn last(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Inverted dropout with its own random stream.
#[derive(Debug)]
pub struct Dropout {
    rate: f64,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(HanError::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Keep-mask scaled by `1/(1-rate)`; rows with `active[r] == false` pass through.
    fn mask(&mut self, rows: usize, cols: usize, active: &[bool]) -> Mat {
        let keep = 1.0 - self.rate;
        let mut m = Mat::filled(rows, cols, 1.0);
        for (r, &on) in active.iter().enumerate().take(rows) {
            if !on {
                continue;
            }
            for v in m.row_mut(r) {
                *v = if self.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
            }
        }
        m
    }

    fn apply<'a>(&mut self, tape: &mut Tape<'a>, x: NodeId, active: &[bool]) -> Result<NodeId> {
        if self.rate == 0.0 {
            return Ok(x);
        }
        let (rows, cols) = tape.value(x)?.shape();
        let m = self.mask(rows, cols, active);
        tape.mul_const(x, m)
    }
}

/// `softmax_masked(q·Kᵀ / sqrt(d), mask)`.
pub fn attention_weights(q: &[f64], keys: &Mat, mask: &[bool]) -> Result<Vec<f64>> {
    if q.len() != keys.cols() || mask.len() != keys.rows() {
        return Err(HanError::Dimension {
            op: "attention_weights",
            left: (1, q.len()),
            right: keys.shape(),
        });
    }
    let scale = 1.0 / (q.len() as f64).sqrt();
    let logits: Vec<f64> = (0..keys.rows()).map(|r| tensor::dot(q, keys.row(r)) * scale).collect();
    tensor::softmax_masked(&logits, mask)
}

/// Output nodes of one recorded layer.
#[derive(Clone, Debug)]
pub struct LayerNodes {
    pub query: NodeId,
    pub keys: NodeId,
    pub weights: Vec<f64>,
}

/// Records one HAN layer on `tape`.
pub fn layer_on_tape<'a>(
    tape: &mut Tape<'a>,
    query: NodeId,
    keys: NodeId,
    mask: &[bool],
    params: &'a HanLayerParams,
    mut dropout: Option<&mut Dropout>,
) -> Result<LayerNodes> {
    let (o, d) = tape.value(keys)?.shape();
    let qshape = tape.value(query)?.shape();
    if qshape != (1, d) || mask.len() != o || params.width() != d {
        return Err(HanError::Dimension {
            op: "han_layer",
            left: qshape,
            right: (o, d),
        });
    }
    let logits = tape.matmul_t(query, keys)?;
    let logits = tape.scale(logits, 1.0 / (d as f64).sqrt())?;
    let w = tape.softmax_masked(logits, mask)?;
    let weights = tape.value(w)?.data().to_vec();

    let pooled = tape.matmul(w, keys)?;
    let q = params.fnn_query.forward(tape, pooled)?;
    let q = tape.relu(q)?;
    let mut q = params.ln_query.forward(tape, q)?;

    let k = params.fnn_key.forward(tape, keys)?;
    let k = tape.relu(k)?;
    let mut k = params.ln_key.forward(tape, k)?;

    if let Some(drop) = dropout.as_deref_mut() {
        q = drop.apply(tape, q, &[true])?;
        k = drop.apply(tape, k, mask)?;
    }
    Ok(LayerNodes { query: q, keys: k, weights })
}

/// One HAN layer on plain values: returns `(q', K', w)`.
pub fn han_layer_forward(
    query: &Mat,
    keys: &Mat,
    mask: &[bool],
    params: &HanLayerParams,
    dropout: Option<&mut Dropout>,
) -> Result<(Mat, Mat, Vec<f64>)> {
    let mut tape = Tape::new();
    let q = tape.constant_ref(query)?;
    let k = tape.constant_ref(keys)?;
    let out = layer_on_tape(&mut tape, q, k, mask, params, dropout)?;
    Ok((tape.value(out.query)?.clone(), tape.value(out.keys)?.clone(), out.weights))
}

/// Records the full stack for one branch, returning the final query node.
pub fn encode_on_tape<'a>(
    tape: &mut Tape<'a>,
    keys: NodeId,
    mask: &[bool],
    state: &'a HanEncoderState,
    branch: Branch,
    mut dropout: Option<&mut Dropout>,
) -> Result<(NodeId, AttentionTrace)> {
    let mut q = tape.param(&state.v0)?;
    let mut k = keys;
    let mut trace = AttentionTrace {
        branch,
        layers: Vec::with_capacity(state.depth()),
    };
    for layer in &state.layers {
        let out = layer_on_tape(tape, q, k, mask, layer, dropout.as_deref_mut())?;
        q = out.query;
        k = out.keys;
        trace.layers.push(out.weights);
    }
    Ok((q, trace))
}

/// Runs the stack on plain values: returns `(v_l, trace)`.
pub fn encode(
    keys: &Mat,
    mask: &[bool],
    state: &HanEncoderState,
    branch: Branch,
    dropout: Option<&mut Dropout>,
) -> Result<(Mat, AttentionTrace)> {
    let mut tape = Tape::new();
    let k = tape.constant_ref(keys)?;
    let (q, trace) = encode_on_tape(&mut tape, k, mask, state, branch, dropout)?;
    Ok((tape.value(q)?.clone(), trace))
}
