//! Distribution file formats.
//!
//! JSON container:
//!
//! ```json
//! { "shape": [2, 2, 2],
//!   "labels": [["t0","t1"], ["x0","x1"], ["y0","y1"]],
//!   "p": [0.125, 0.125, ...] }
//! ```
//!
//! with `p` flat in `t`-major order (`t`, then `x`, then `y`) and `labels`
//! optional. Alternatively, CSV rows `t,x,y,prob` of state indices, where
//! omitted atoms mean zero; lines starting with `#` and a header row are
//! skipped.

use crate::distributions::{Alphabet, DistError, JointDist3};
use ndarray::Array3;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("shape {shape:?} does not match {expected} probabilities (found {found})")]
    LengthMismatch { shape: [usize; 3], expected: usize, found: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("cannot determine format; expected a JSON object or CSV rows t,x,y,prob")]
    UnknownFormat,
}

#[derive(Deserialize)]
struct DistFile {
    shape: [usize; 3],
    #[serde(default)]
    labels: Option<[Vec<String>; 3]>,
    p: Vec<f64>,
}

/// Parses the JSON container.
pub fn parse_json(text: &str) -> Result<JointDist3, IoError> {
    let file: DistFile = serde_json::from_str(text)?;
    let expected = file.shape.iter().product::<usize>();
    if file.p.len() != expected {
        return Err(IoError::LengthMismatch {
            shape: file.shape,
            expected,
            found: file.p.len(),
        });
    }
    let p = Array3::from_shape_vec((file.shape[0], file.shape[1], file.shape[2]), file.p)
        .expect("length checked");
    let dist = match file.labels {
        Some(labels) => {
            let alphabets = [
                Alphabet::with_labels(labels[0].clone())?,
                Alphabet::with_labels(labels[1].clone())?,
                Alphabet::with_labels(labels[2].clone())?,
            ];
            JointDist3::validate_with(alphabets, p)?
        }
        None => JointDist3::validate(p)?,
    };
    Ok(dist)
}

/// Parses CSV triples `t,x,y,prob`; the shape is the smallest box holding
/// all mentioned states.
pub fn parse_csv(text: &str) -> Result<JointDist3, IoError> {
    let mut atoms: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(IoError::Csv { line: idx + 1, msg: format!("expected 4 fields, got {}", fields.len()) });
        }
        // Tolerate a header row.
        if idx == 0 && fields[0].parse::<usize>().is_err() {
            continue;
        }
        let parse_idx = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| IoError::Csv {
                line: idx + 1,
                msg: format!("bad {what} index {s:?}"),
            })
        };
        let t = parse_idx(fields[0], "t")?;
        let x = parse_idx(fields[1], "x")?;
        let y = parse_idx(fields[2], "y")?;
        let prob = fields[3].parse::<f64>().map_err(|_| IoError::Csv {
            line: idx + 1,
            msg: format!("bad probability {:?}", fields[3]),
        })?;
        atoms.push((t, x, y, prob));
    }
    if atoms.is_empty() {
        return Err(IoError::UnknownFormat);
    }
    let nt = atoms.iter().map(|a| a.0).max().unwrap() + 1;
    let nx = atoms.iter().map(|a| a.1).max().unwrap() + 1;
    let ny = atoms.iter().map(|a| a.2).max().unwrap() + 1;
    let mut p = Array3::zeros((nt, nx, ny));
    for (t, x, y, prob) in atoms {
        p[(t, x, y)] += prob;
    }
    Ok(JointDist3::validate(p)?)
}

/// Parses either supported format, sniffing JSON by its leading brace.
pub fn parse_auto(text: &str) -> Result<JointDist3, IoError> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_csv(text)
    }
}

/// The canonical JSON text of a distribution.
pub fn to_json(dist: &JointDist3) -> String {
    serde_json::to_string_pretty(dist).expect("serialization cannot fail")
}
