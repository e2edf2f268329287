//! Two-spiral dataset: generation and CSV persistence.
//!
//! [`generate_spiral`] draws `2n` points forming two interleaved spiral arms,
//! one per class label (+1 and -1), alternating labels starting with +1. Each
//! point draws a radial position `u` uniform on [0, 1) and an angular jitter
//! uniform on [-0.15, 0.15), in that order, so a dataset is a pure function
//! of the generator state. Radius grows as `0.1 + 0.9u`; the angle sweeps
//! `3*pi*u`, offset by `pi` for the -1 arm, plus the jitter. Coordinates are
//! `x = r*sin(theta)`, `y = r*cos(theta)`, keeping every point inside the
//! unit disk.

use crate::rng::Rng;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// One labelled point. `label` is +1 or -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub label: i32,
}

/// A list of labelled points, in generation (or file) order.
pub type Dataset = Vec<Sample>;

/// Errors from reading or writing dataset files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `x,y,label` with three fields, got {got} fields")]
    FieldCount {
        path: String,
        line: usize,
        got: usize,
    },
    #[error("{path}:{line}: bad {field} value {text:?}")]
    BadNumber {
        path: String,
        line: usize,
        field: &'static str,
        text: String,
    },
    #[error("{path}:{line}: label must be 1 or -1, got {got}")]
    BadLabel { path: String, line: usize, got: i32 },
}

/// Draws `n` points per class (2n total), interleaved +1, -1, +1, -1, ...
pub fn generate_spiral(rng: &mut Rng, n: usize) -> Dataset {
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..n {
        for class in [1, -1] {
            let u = rng.next_uniform();
            let jitter = rng.next_range(-0.15, 0.15);
            let r = 0.1 + 0.9 * u;
            let offset = if class == -1 {
                std::f64::consts::PI
            } else {
                0.0
            };
            let theta = 3.0 * std::f64::consts::PI * u + offset + jitter;
            out.push(Sample {
                x: r * theta.sin(),
                y: r * theta.cos(),
                label: class,
            });
        }
    }
    out
}

/// Writes `x,y,label` lines (every line newline-terminated). Coordinates are
/// rendered with enough digits to round-trip exactly.
pub fn save_csv(path: &Path, data: &[Sample]) -> Result<(), DataError> {
    let mut text = String::new();
    for s in data {
        // writeln! to a String cannot fail.
        let _ = writeln!(text, "{:?},{:?},{}", s.x, s.y, s.label);
    }
    std::fs::write(path, text).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a dataset written by [`save_csv`]. Blank lines are skipped; any
/// malformed line is reported with its 1-based line number.
pub fn load_csv(path: &Path) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(DataError::FieldCount {
                path: name,
                line,
                got: fields.len(),
            });
        }
        let num = |field: &'static str, text: &str| -> Result<f64, DataError> {
            text.trim()
                .parse::<f64>()
                .map_err(|_| DataError::BadNumber {
                    path: name.clone(),
                    line,
                    field,
                    text: text.to_string(),
                })
        };
        let x = num("x", fields[0])?;
        let y = num("y", fields[1])?;
        let label: i32 = fields[2].trim().parse().map_err(|_| DataError::BadNumber {
            path: name.clone(),
            line,
            field: "label",
            text: fields[2].to_string(),
        })?;
        if label != 1 && label != -1 {
            return Err(DataError::BadLabel {
                path: name,
                line,
                got: label,
            });
        }
        out.push(Sample { x, y, label });
    }
    Ok(out)
}
