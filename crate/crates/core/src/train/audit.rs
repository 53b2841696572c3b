//! Per-layer parameter counts of the HAN layer and the encoders it is
//! compared against.

use std::fmt;
use std::str::FromStr;

use crate::error::{HanError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    Han,
    Lstm,
    BiLstm,
    Gru,
    BiGru,
    /// Transformer layer in front of HAN.
    TfFirst,
    /// HAN layer stacked with a transformer layer.
    HanTf,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 7] = [
        EncoderKind::Han,
        EncoderKind::Lstm,
        EncoderKind::BiLstm,
        EncoderKind::Gru,
        EncoderKind::BiGru,
        EncoderKind::TfFirst,
        EncoderKind::HanTf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Han => "HAN",
            EncoderKind::Lstm => "LSTM",
            EncoderKind::BiLstm => "BiLSTM",
            EncoderKind::Gru => "GRU",
            EncoderKind::BiGru => "BiGRU",
            EncoderKind::TfFirst => "TF-first",
            EncoderKind::HanTf => "HAN-TF",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = HanError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HanError::UnknownEncoderKind(s.to_string()))
    }
}

/// Weights and biases of one `d → d` linear map.
fn dense(d: u64) -> u64 {
    d * d + d
}

/// Transformer encoder layer: Q/K/V/output projections, a `d → d_ff → d`
/// feed-forward block and two layer norms.
fn transformer(d: u64, d_ff: u64) -> u64 {
    4 * dense(d) + (d * d_ff + d_ff * d + d_ff + d) + 4 * d
}

/// Parameters of one layer of the given encoder.
///
/// `heads` must divide `d`; it does not change the count because the
/// heads partition the projections.
pub fn count_params(kind: EncoderKind, d: usize, heads: usize, d_ff: usize) -> Result<u64> {
    if d == 0 || d_ff == 0 || heads == 0 || d % heads != 0 {
        return Err(HanError::InvalidArgument(format!(
            "count_params needs d, d_ff >= 1 and heads dividing d (d={d}, heads={heads}, d_ff={d_ff})"
        )));
    }
    let (d, d_ff) = (d as u64, d_ff as u64);
    // LSTM/GRU gates keep separate input and recurrent biases
    let lstm = 4 * (2 * d * d + 2 * d);
    let gru = 3 * (2 * d * d + 2 * d);
    Ok(match kind {
        EncoderKind::Han => 2 * dense(d) + 4 * d,
        EncoderKind::Lstm => lstm,
        EncoderKind::BiLstm => 2 * lstm,
        EncoderKind::Gru => gru,
        EncoderKind::BiGru => 2 * gru,
        EncoderKind::TfFirst => transformer(d, d_ff),
        EncoderKind::HanTf => dense(d) + 2 * d + transformer(d, d_ff),
    })
}

/// `1184256` → `"1.18M"`.
pub fn format_millions(count: u64) -> String {
    format!("{:.2}M", count as f64 / 1e6)
}
