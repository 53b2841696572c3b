//! Attention-based explanations.
//!
//! Tweets and mappings are ranked by their last-layer attention weight;
//! every layer is exported for heat maps.
//!
//! Heat CSV columns: `user_id,branch,layer,item,weight`, with 0-based layer
//! and item indices and weights in shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::data::UserRecord;
use crate::encoder::{AttentionTrace, Branch};
use crate::error::{HanError, Result};
use crate::head::HanModel;
use crate::train::predict_record;

/// All layers of both branches for one user (inference mode). The MCM
/// trace is `None` when the branch is ablated or the user has no mappings.
pub fn attention_trace(model: &HanModel, user: &UserRecord, cap: usize) -> Result<(AttentionTrace, Option<AttentionTrace>)> {
    let out = predict_record(model, user, cap)?;
    let mcm = if out.mcm_fallback { None } else { out.mcm_trace };
    Ok((out.tweet_trace, mcm))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedItem {
    /// 1-based.
    pub rank: usize,
    /// Position in the user's stored order.
    pub index: usize,
    pub weight: f64,
    pub text: String,
}

/// The `k` items with the highest last-layer weight. Only the first
/// `min(items, trace width)` positions are eligible; ties keep the original
/// order.
pub fn top_k(trace: &AttentionTrace, items: &[String], k: usize) -> Vec<RankedItem> {
    let last = trace.last();
    let n = items.len().min(last.len());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| last[b].total_cmp(&last[a]));
    idx.into_iter()
        .take(k)
        .enumerate()
        .map(|(r, i)| RankedItem {
            rank: r + 1,
            index: i,
            weight: last[i],
            text: items[i].clone(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExplanationReport {
    pub user_id: String,
    pub predicted: u8,
    pub probs: [f64; 2],
    pub gold: u8,
    pub tweets: Vec<RankedItem>,
    /// Empty when the user has no mappings or the branch is ablated.
    pub mcms: Vec<RankedItem>,
    pub tweet_layers: Vec<Vec<f64>>,
    pub mcm_layers: Vec<Vec<f64>>,
}

pub fn build_report(model: &HanModel, user: &UserRecord, k: usize, cap: usize) -> Result<ExplanationReport> {
    if k == 0 {
        return Err(HanError::InvalidArgument("k must be >= 1".into()));
    }
    let out = predict_record(model, user, cap)?;
    let mcm = if out.mcm_fallback { None } else { out.mcm_trace };
    Ok(ExplanationReport {
        user_id: user.user_id.clone(),
        predicted: out.prediction.label,
        probs: out.prediction.probs,
        gold: user.label,
        tweets: top_k(&out.tweet_trace, &user.tweets, k),
        mcms: mcm.as_ref().map(|t| top_k(t, &user.mcms, k)).unwrap_or_default(),
        tweet_layers: out.tweet_trace.layers,
        mcm_layers: mcm.map(|t| t.layers).unwrap_or_default(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    /// Ranked tweets and mappings side by side.
    Text,
    /// One JSON object per user.
    JsonLines,
    /// Every attention weight of every layer.
    HeatCsv,
}

fn is_degenerate(mapping: &str) -> bool {
    mapping.split_once(" IS ").is_some_and(|(a, b)| a == b)
}

fn text_report(r: &ExplanationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "user {}  predicted {}  gold {}  p(depressed) {:.4}", r.user_id, r.predicted, r.gold, r.probs[1]);
    let tweet_cells: Vec<String> = r.tweets.iter().map(|t| format!("{}. [{:.4}] {}", t.rank, t.weight, t.text)).collect();
    let mcm_cells: Vec<String> = if r.mcms.is_empty() {
        vec!["none".into()]
    } else {
        r.mcms
            .iter()
            .map(|m| {
                let flag = if is_degenerate(&m.text) { " (degenerate)" } else { "" };
                format!("{}. [{:.4}] {}{}", m.rank, m.weight, m.text, flag)
            })
            .collect()
    };
    let width = tweet_cells.iter().map(|c| c.chars().count()).chain([5]).max().unwrap_or(5);
    let _ = writeln!(s, "{:<width$} | metaphor", "tweet");
    for i in 0..tweet_cells.len().max(mcm_cells.len()) {
        let left = tweet_cells.get(i).map_or("", String::as_str);
        let right = mcm_cells.get(i).map_or("", String::as_str);
        let line = format!("{left:<width$} | {right}");
        let _ = writeln!(s, "{}", line.trim_end());
    }
    s
}

/// Writes the reports in the given format. Output bytes depend only on the
/// reports.
pub fn emit_report(reports: &[ExplanationReport], format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| HanError::io("<report>", e);
    match format {
        ReportFormat::Text => {
            for (i, r) in reports.iter().enumerate() {
                if i > 0 {
                    writeln!(out).map_err(io)?;
                }
                out.write_all(text_report(r).as_bytes()).map_err(io)?;
            }
        }
        ReportFormat::JsonLines => {
            for r in reports {
                let line = serde_json::to_string(r).map_err(|e| HanError::InvalidArgument(e.to_string()))?;
                writeln!(out, "{line}").map_err(io)?;
            }
        }
        ReportFormat::HeatCsv => {
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| HanError::InvalidArgument(format!("heat csv: {e}"));
            w.write_record(["user_id", "branch", "layer", "item", "weight"]).map_err(csv_err)?;
            for r in reports {
                for (branch, layers) in [(Branch::Tweet, &r.tweet_layers), (Branch::Mcm, &r.mcm_layers)] {
                    for (l, weights) in layers.iter().enumerate() {
                        for (i, w_i) in weights.iter().enumerate() {
                            w.write_record([
                                r.user_id.as_str(),
                                branch.as_str(),
                                &l.to_string(),
                                &i.to_string(),
                                &w_i.to_string(),
                            ])
                            .map_err(csv_err)?;
                        }
                    }
                }
            }
            w.flush().map_err(io)?;
        }
    }
    Ok(())
}

/// One user's branch as read back from a heat CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatTrace {
    pub user_id: String,
    pub trace: AttentionTrace,
}

/// Parses a heat CSV back into traces, in order of first appearance.
pub fn parse_heat_csv(text: &str) -> Result<Vec<HeatTrace>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<HeatTrace> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let bad = |message: String| HanError::Parse { line, offset: 0, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", rec.len())));
        }
        let branch = match &rec[1] {
            "tweet" => Branch::Tweet,
            "mcm" => Branch::Mcm,
            other => return Err(bad(format!("unknown branch {other:?}"))),
        };
        let layer: usize = rec[2].parse().map_err(|_| bad(format!("bad layer {:?}", &rec[2])))?;
        let item: usize = rec[3].parse().map_err(|_| bad(format!("bad item {:?}", &rec[3])))?;
        let weight: f64 = rec[4].parse().map_err(|_| bad(format!("bad weight {:?}", &rec[4])))?;
        let pos = out.iter().position(|h| h.user_id == rec[0] && h.trace.branch == branch);
        let entry = match pos {
            Some(p) => &mut out[p],
            None => {
                out.push(HeatTrace {
                    user_id: rec[0].to_string(),
                    trace: AttentionTrace { branch, layers: Vec::new() },
                });
                out.last_mut().expect("just pushed")
            }
        };
        let layers = &mut entry.trace.layers;
        if layer > layers.len() || (layer < layers.len().saturating_sub(1)) {
            return Err(bad(format!("layer {layer} out of order")));
        }
        if layer == layers.len() {
            layers.push(Vec::new());
        }
        let row = &mut layers[layer];
        if item != row.len() {
            return Err(bad(format!("item {item} out of order")));
        }
        row.push(weight);
    }
    Ok(out)
}
