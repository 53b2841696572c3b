//! Reverse-mode differentiation over [`Mat`] values.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Leaves
//! are either constants or registered [`Param`]s; [`Tape::backward`] replays
//! the record in reverse and returns one gradient buffer per registered
//! parameter. Parameter values are borrowed, not copied, so a tape must be
//! dropped before the optimizer mutates the parameters it read.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::tensor::{self, ln_stats, Mat};

/// Stable identifier of a trainable parameter within one model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub u32);

/// A named trainable matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub id: ParamId,
    pub name: String,
    pub value: Mat,
}

/// Hands out consecutive [`ParamId`]s while a model is being initialized.
#[derive(Debug, Default)]
pub struct ParamAllocator {
    next: u32,
}

impl ParamAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn param(&mut self, name: impl Into<String>, value: Mat) -> Param {
        let id = ParamId(self.next);
        self.next += 1;
        Param {
            id,
            name: name.into(),
            value,
        }
    }
}

/// Anything that owns trainable parameters.
///
/// Both methods must list parameters in the same order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    MatMulT(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Relu(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Softmax(usize),
    Scale(usize, f64),
    MulConst(usize, Mat),
    ConcatCols(usize, usize),
    NegLogPick {
        x: usize,
        index: usize,
        floor: f64,
    },
    Sum(usize),
}

struct Node<'a> {
    value: Cow<'a, Mat>,
    op: Op,
    requires_grad: bool,
}

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Record of primitive applications for one forward pass.
pub struct Tape<'a> {
    id: u64,
    nodes: Vec<Node<'a>>,
    params: Vec<(ParamId, (usize, usize))>,
    consumed: bool,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, node: NodeId) -> Result<usize> {
        if node.tape != self.id || node.index >= self.nodes.len() {
            return Err(HanError::DetachedNode);
        }
        Ok(node.index)
    }

    fn push(&mut self, value: Cow<'a, Mat>, op: Op, requires_grad: bool, name: &'static str) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(HanError::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(NodeId {
            tape: self.id,
            index: self.nodes.len() - 1,
        })
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    pub fn value(&self, node: NodeId) -> Result<&Mat> {
        Ok(&self.nodes[self.idx(node)?].value)
    }

    /// Registers a trainable parameter; its value is borrowed.
    pub fn param(&mut self, p: &'a Param) -> Result<NodeId> {
        self.params.push((p.id, p.value.shape()));
        self.push(Cow::Borrowed(&p.value), Op::Param(p.id), true, "param")
    }

    pub fn constant(&mut self, value: Mat) -> Result<NodeId> {
        self.push(Cow::Owned(value), Op::Leaf, false, "constant")
    }

    pub fn constant_ref(&mut self, value: &'a Mat) -> Result<NodeId> {
        self.push(Cow::Borrowed(value), Op::Leaf, false, "constant")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let v = self.nodes[a].value.matmul(&self.nodes[b].value)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(v), Op::MatMul(a, b), rg, "matmul")
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let v = self.nodes[a].value.matmul_t(&self.nodes[b].value)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(v), Op::MatMulT(a, b), rg, "matmul_t")
    }

    /// Adds the `1 x cols` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, b) = (self.idx(x)?, self.idx(b)?);
        let (xv, bv) = (&self.nodes[x].value, &self.nodes[b].value);
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(HanError::Dimension {
                op: "add_row",
                left: xv.shape(),
                right: bv.shape(),
            });
        }
        let mut v = xv.as_ref().clone();
        for r in 0..v.rows() {
            for (o, b) in v.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        self.push(Cow::Owned(v), Op::AddRow(x, b), rg, "add_row")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        if av.shape() != bv.shape() {
            return Err(HanError::Dimension {
                op: "add",
                left: av.shape(),
                right: bv.shape(),
            });
        }
        let mut v = av.as_ref().clone();
        v.add_assign(bv);
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(v), Op::Add(a, b), rg, "add")
    }

    /// `x·W + b` with `b` a `1 x cols` row.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let x = self.idx(x)?;
        let v = tensor::relu(&self.nodes[x].value);
        let rg = self.rg(x);
        self.push(Cow::Owned(v), Op::Relu(x), rg, "relu")
    }

    /// Row-wise layer normalization with `1 x cols` gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> Result<NodeId> {
        let (x, gain, bias) = (self.idx(x)?, self.idx(gain)?, self.idx(bias)?);
        let xv = &self.nodes[x].value;
        let (gv, bv) = (&self.nodes[gain].value, &self.nodes[bias].value);
        if gv.shape() != (1, xv.cols()) || bv.shape() != (1, xv.cols()) {
            return Err(HanError::Dimension {
                op: "layer_norm",
                left: xv.shape(),
                right: gv.shape(),
            });
        }
        let mut xhat = Mat::zeros(xv.rows(), xv.cols());
        let mut out = Mat::zeros(xv.rows(), xv.cols());
        let mut inv_std = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let (mean, is) = ln_stats(row, eps);
            inv_std.push(is);
            for c in 0..row.len() {
                let h = (row[c] - mean) * is;
                xhat.set(r, c, h);
                out.set(r, c, gv.data()[c] * h + bv.data()[c]);
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        self.push(
            Cow::Owned(out),
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
            "layer_norm",
        )
    }

    /// Masked softmax over a `1 x n` row.
    pub fn softmax_masked(&mut self, x: NodeId, mask: &[bool]) -> Result<NodeId> {
        let x = self.idx(x)?;
        let xv = &self.nodes[x].value;
        if xv.rows() != 1 {
            return Err(HanError::Dimension {
                op: "softmax_masked",
                left: xv.shape(),
                right: (1, mask.len()),
            });
        }
        let v = tensor::softmax_masked(xv.data(), mask)?;
        let rg = self.rg(x);
        self.push(Cow::Owned(Mat::row_vector(v)), Op::Softmax(x), rg, "softmax_masked")
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> Result<NodeId> {
        let x = self.idx(x)?;
        let v = self.nodes[x].value.scale(s);
        let rg = self.rg(x);
        self.push(Cow::Owned(v), Op::Scale(x, s), rg, "scale")
    }

    /// Elementwise product with a constant matrix (dropout masks).
    pub fn mul_const(&mut self, x: NodeId, c: Mat) -> Result<NodeId> {
        let x = self.idx(x)?;
        let xv = &self.nodes[x].value;
        if xv.shape() != c.shape() {
            return Err(HanError::Dimension {
                op: "mul_const",
                left: xv.shape(),
                right: c.shape(),
            });
        }
        let data = xv.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
        let v = Mat::from_vec(xv.rows(), xv.cols(), data)?;
        let rg = self.rg(x);
        self.push(Cow::Owned(v), Op::MulConst(x, c), rg, "mul_const")
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        let v = self.nodes[a].value.hstack(&self.nodes[b].value)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Cow::Owned(v), Op::ConcatCols(a, b), rg, "concat_cols")
    }

    /// `−ln(max(x[0, index], floor))` as a scalar.
    pub fn neg_log_pick(&mut self, x: NodeId, index: usize, floor: f64) -> Result<NodeId> {
        let x = self.idx(x)?;
        let xv = &self.nodes[x].value;
        if xv.rows() != 1 || index >= xv.cols() {
            return Err(HanError::Dimension {
                op: "neg_log_pick",
                left: xv.shape(),
                right: (1, index + 1),
            });
        }
        let p = xv.data()[index].max(floor);
        let rg = self.rg(x);
        self.push(
            Cow::Owned(Mat::scalar(-p.ln())),
            Op::NegLogPick { x, index, floor },
            rg,
            "neg_log_pick",
        )
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let x = self.idx(x)?;
        let v = Mat::scalar(self.nodes[x].value.sum());
        let rg = self.rg(x);
        self.push(Cow::Owned(v), Op::Sum(x), rg, "sum")
    }

    /// Reverse pass from a scalar root. A tape can be replayed only once.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.consumed {
            return Err(HanError::TapeConsumed);
        }
        let root = self.idx(loss)?;
        let shape = self.nodes[root].value.shape();
        if shape != (1, 1) {
            return Err(HanError::NonScalarRoot(shape.0, shape.1));
        }
        self.consumed = true;

        let mut out = Gradients::default();
        for &(id, (r, c)) in &self.params {
            out.grads.entry(id).or_insert_with(|| Mat::zeros(r, c));
        }

        let mut grads: Vec<Option<Mat>> = (0..=root).map(|_| None).collect();
        grads[root] = Some(Mat::scalar(1.0));

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let nodes = &self.nodes;
            let mut send = |j: usize, delta: Mat| {
                if !nodes[j].requires_grad {
                    return;
                }
                match &mut grads[j] {
                    Some(acc) => acc.add_assign(&delta),
                    slot => *slot = Some(delta),
                }
            };
            match &nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.grads
                        .get_mut(id)
                        .expect("registered parameter")
                        .add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].requires_grad {
                        send(*a, g.matmul_t(bv)?);
                    }
                    if nodes[*b].requires_grad {
                        send(*b, av.t_matmul(&g)?);
                    }
                }
                Op::MatMulT(a, b) => {
                    // out = a·bᵀ: da = g·b, db = gᵀ·a
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].requires_grad {
                        send(*a, g.matmul(bv)?);
                    }
                    if nodes[*b].requires_grad {
                        send(*b, g.t_matmul(av)?);
                    }
                }
                Op::AddRow(x, b) => {
                    if nodes[*b].requires_grad {
                        let mut db = Mat::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (d, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                                *d += v;
                            }
                        }
                        send(*b, db);
                    }
                    send(*x, g);
                }
                Op::Add(a, b) => {
                    send(*b, g.clone());
                    send(*a, g);
                }
                Op::Relu(x) => {
                    let xv = &nodes[*x].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(gv, &v)| if v > 0.0 { *gv } else { 0.0 })
                        .collect();
                    send(*x, Mat::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gv = &nodes[*gain].value;
                    let cols = g.cols();
                    let n = cols as f64;
                    let mut dgain = Mat::zeros(1, cols);
                    let mut dbias = Mat::zeros(1, cols);
                    let mut dx = Mat::zeros(g.rows(), cols);
                    for r in 0..g.rows() {
                        let (gr, hr) = (g.row(r), xhat.row(r));
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for c in 0..cols {
                            dgain.data_mut()[c] += gr[c] * hr[c];
                            dbias.data_mut()[c] += gr[c];
                            let dh = gr[c] * gv.data()[c];
                            mean_dh += dh;
                            mean_dh_h += dh * hr[c];
                        }
                        mean_dh /= n;
                        mean_dh_h /= n;
                        let dxr = dx.row_mut(r);
                        for c in 0..cols {
                            let dh = gr[c] * gv.data()[c];
                            dxr[c] = inv_std[r] * (dh - mean_dh - hr[c] * mean_dh_h);
                        }
                    }
                    send(*gain, dgain);
                    send(*bias, dbias);
                    send(*x, dx);
                }
                Op::Softmax(x) => {
                    let y = nodes[i].value.data();
                    let inner = tensor::dot(y, g.data());
                    let data = y.iter().zip(g.data()).map(|(yv, gv)| yv * (gv - inner)).collect();
                    send(*x, Mat::row_vector(data));
                }
                Op::Scale(x, s) => send(*x, g.scale(*s)),
                Op::MulConst(x, c) => {
                    let data = g.data().iter().zip(c.data()).map(|(a, b)| a * b).collect();
                    send(*x, Mat::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::ConcatCols(a, b) => {
                    let ac = nodes[*a].value.cols();
                    let bc = nodes[*b].value.cols();
                    let mut da = Mat::zeros(g.rows(), ac);
                    let mut db = Mat::zeros(g.rows(), bc);
                    for r in 0..g.rows() {
                        da.row_mut(r).copy_from_slice(&g.row(r)[..ac]);
                        db.row_mut(r).copy_from_slice(&g.row(r)[ac..]);
                    }
                    send(*a, da);
                    send(*b, db);
                }
                Op::NegLogPick { x, index, floor } => {
                    let xv = &nodes[*x].value;
                    let p = xv.data()[*index];
                    let mut dx = Mat::zeros(1, xv.cols());
                    if p >= *floor {
                        dx.data_mut()[*index] = -g.item() / p;
                    }
                    send(*x, dx);
                }
                Op::Sum(x) => {
                    let (r, c) = nodes[*x].value.shape();
                    send(*x, Mat::filled(r, c, g.item()));
                }
            }
        }
        Ok(out)
    }
}

/// Accumulated loss gradients keyed by parameter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Mat>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.grads.get(&id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Mat)> {
        self.grads.iter()
    }

    /// `self += scale · other`, adding buffers missing from `self`.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (id, g) in &other.grads {
            let scaled = g.scale(scale);
            match self.grads.get_mut(id) {
                Some(acc) => acc.add_assign(&scaled),
                None => {
                    self.grads.insert(*id, scaled);
                }
            }
        }
    }
}

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Coordinates skipped because the loss has a kink there.
    pub skipped: usize,
}

/// Compares `analytic` with central differences of `f` over every parameter
/// coordinate of `model`.
///
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, 1e-8)`.
/// Coordinates where the one-sided differences disagree (a ReLU kink sits
/// within `eps`) are skipped.
pub fn finite_diff_check<M, F>(model: &mut M, mut f: F, analytic: &Gradients, eps: f64) -> Result<GradCheck>
where
    M: Parameterized,
    F: FnMut(&M) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(HanError::InvalidArgument(format!(
            "finite-difference eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    let base = f(model)?;
    if !base.is_finite() {
        return Err(HanError::NonFinite("finite_diff_check"));
    }
    let layout: Vec<(ParamId, String, usize)> = model
        .params()
        .iter()
        .map(|p| (p.id, p.name.clone(), p.value.len()))
        .collect();

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for (pi, (id, name, len)) in layout.iter().enumerate() {
        let grad = analytic
            .get(*id)
            .ok_or_else(|| HanError::InvalidArgument(format!("no analytic gradient for {name}")))?;
        for k in 0..*len {
            let orig = model.params_mut()[pi].value.data()[k];
            model.params_mut()[pi].value.data_mut()[k] = orig + eps;
            let plus = f(model);
            model.params_mut()[pi].value.data_mut()[k] = orig - eps;
            let minus = f(model);
            model.params_mut()[pi].value.data_mut()[k] = orig;
            let (plus, minus) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(HanError::NonFinite("finite_diff_check"));
            }
            let forward = (plus - base) / eps;
            let backward = (base - minus) / eps;
            if (forward - backward).abs() > 1e-3 * forward.abs().max(backward.abs()).max(1.0) {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    Ok(report)
}
