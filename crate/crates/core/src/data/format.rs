//! Line-delimited dataset files.
//!
//! ```text
//! {"format":"hankit-dataset","version":1,"d":768}
//! {"user_id":"u1","label":1,"split":"train","tweets":[...],"mcms":[...],"tweet_emb":[...],"mcm_emb":[...]}
//! ...
//! ```
//!
//! Each embedding row is the standard base64 encoding of `d` little-endian
//! IEEE-754 binary32 values. Rows are upcast to `f64` on load, so a dataset
//! whose values are exactly representable in `f32` round-trips bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::record::{Dataset, SplitTag, UserRecord};
use crate::error::{HanError, Result};
use crate::tensor::Mat;

pub const FORMAT_NAME: &str = "hankit-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    d: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserLine {
    user_id: String,
    label: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitTag>,
    tweets: Vec<String>,
    #[serde(default)]
    mcms: Vec<String>,
    tweet_emb: Vec<String>,
    #[serde(default)]
    mcm_emb: Vec<String>,
}

fn encode_row(row: &[f64]) -> Result<String> {
    let mut bytes = Vec::with_capacity(row.len() * 4);
    for &v in row {
        let f = v as f32;
        if !f.is_finite() {
            return Err(HanError::NonFinite("save_dataset"));
        }
        bytes.extend_from_slice(&f.to_le_bytes());
    }
    Ok(STANDARD.encode(bytes))
}

fn encode_rows(m: &Mat) -> Result<Vec<String>> {
    (0..m.rows()).map(|r| encode_row(m.row(r))).collect()
}

fn decode_rows(rows: &[String], d: usize) -> std::result::Result<Mat, String> {
    let mut data = Vec::with_capacity(rows.len() * d);
    for (i, row) in rows.iter().enumerate() {
        let bytes = STANDARD.decode(row).map_err(|e| format!("embedding row {i}: {e}"))?;
        if bytes.len() != d * 4 {
            return Err(format!(
                "embedding row {i} holds {} bytes, expected {} for d={d}",
                bytes.len(),
                d * 4
            ));
        }
        for chunk in bytes.chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(format!("embedding row {i} has a non-finite value"));
            }
            data.push(v as f64);
        }
    }
    Mat::from_vec(rows.len(), d, data).map_err(|e| e.to_string())
}

/// Serializes a dataset to the line format.
pub fn write_dataset(dataset: &Dataset, mut out: impl Write) -> Result<()> {
    let header = Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        d: dataset.d,
    };
    let io = |e: std::io::Error| HanError::io("<writer>", e);
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
    for u in &dataset.users {
        let line = UserLine {
            user_id: u.user_id.clone(),
            label: u.label as i64,
            split: u.split,
            tweets: u.tweets.clone(),
            mcms: u.mcms.clone(),
            tweet_emb: encode_rows(&u.tweet_emb)?,
            mcm_emb: encode_rows(&u.mcm_emb)?,
        };
        writeln!(out, "{}", serde_json::to_string(&line).expect("user serializes")).map_err(io)?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf)?;
    fs::write(path, buf).map_err(|e| HanError::io(path, e))
}

/// Parses the line format. Errors carry the 1-based line and byte offset.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut offset = 0usize;
    let mut header: Option<Header> = None;
    let mut users = Vec::new();
    let mut ids = std::collections::HashSet::new();

    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        let start = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let err = |column: usize, message: String| HanError::Parse {
            line: line_no,
            offset: start + column,
            message,
        };
        let json_err = |e: serde_json::Error| err(e.column().saturating_sub(1), e.to_string());

        let Some(h) = &header else {
            let h: Header = serde_json::from_str(line).map_err(json_err)?;
            if h.format != FORMAT_NAME {
                return Err(err(0, format!("unknown format {:?}", h.format)));
            }
            if h.version != FORMAT_VERSION {
                return Err(err(0, format!("unsupported version {}", h.version)));
            }
            if h.d == 0 {
                return Err(err(0, "d must be >= 1".into()));
            }
            header = Some(h);
            continue;
        };
        let u: UserLine = serde_json::from_str(line).map_err(json_err)?;
        if !(0..=1).contains(&u.label) {
            return Err(err(0, format!("label {} is not 0 or 1", u.label)));
        }
        if u.tweets.len() != u.tweet_emb.len() {
            return Err(err(
                0,
                format!("{} tweets but {} tweet embedding rows", u.tweets.len(), u.tweet_emb.len()),
            ));
        }
        if u.mcms.len() != u.mcm_emb.len() {
            return Err(err(
                0,
                format!("{} mcms but {} mcm embedding rows", u.mcms.len(), u.mcm_emb.len()),
            ));
        }
        if !ids.insert(u.user_id.clone()) {
            return Err(err(0, format!("duplicate user id {}", u.user_id)));
        }
        let tweet_emb = decode_rows(&u.tweet_emb, h.d).map_err(|m| err(0, m))?;
        let mcm_emb = decode_rows(&u.mcm_emb, h.d).map_err(|m| err(0, m))?;
        users.push(UserRecord {
            user_id: u.user_id,
            label: u.label as u8,
            tweets: u.tweets,
            mcms: u.mcms,
            tweet_emb,
            mcm_emb,
            split: u.split,
        });
    }
    let header = header.ok_or(HanError::Parse {
        line: 1,
        offset: 0,
        message: "missing header".into(),
    })?;
    Dataset::new(header.d, users)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
    parse_dataset(&text)
}
