//! Figure emission without a plotting library: a pgfplots-style coordinate
//! text file plus hand-written SVG — a loss-versus-epoch line chart and a
//! two-color scatter of labelled points on the unit disk.
//!
//! All output is deterministic: fixed layout constants, fixed-precision
//! pixel coordinates, and loss values rendered as plain decimals (never
//! exponent notation) with enough digits to round-trip exactly.

use crate::data::Sample;
use crate::train::EpochLossLog;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors from figure emission.
#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot plot an empty loss log")]
    EmptyLog,
    #[error("cannot plot an empty sample list")]
    EmptySamples,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// What a produced figure file is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    LossCurve,
    Scatter,
}

/// One emitted figure: its kind, where it was written, and the exact bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotArtifact {
    pub kind: PlotKind,
    pub path: PathBuf,
    pub payload: String,
}

/// Renders a float as a plain decimal that parses back to the same bits.
/// Starts from the shortest round-trip form and, when that form uses
/// exponent notation, shifts the decimal point by hand — pure string
/// surgery, so no precision is lost.
fn plain_decimal(v: f64) -> String {
    let s = format!("{v:?}");
    let Some(epos) = s.find(['e', 'E']) else {
        return s;
    };
    let exp: i32 = s[epos + 1..].parse().expect("float exponent");
    let mantissa = &s[..epos];
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    let point = int_part.len() as i32 + exp;

    let mut out = String::from(sign);
    if point <= 0 {
        out.push_str("0.");
        for _ in 0..-point {
            out.push('0');
        }
        out.push_str(&digits);
    } else if (point as usize) < digits.len() {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    } else {
        out.push_str(&digits);
        for _ in 0..(point as usize - digits.len()) {
            out.push('0');
        }
        out.push_str(".0");
    }
    out
}

/// The coordinate list consumed by a pgfplots axis: space-separated
/// `(epoch,loss)` tokens, no trailing newline.
pub fn loss_coordinates(log: &EpochLossLog) -> String {
    let mut out = String::new();
    for (i, &(epoch, loss)) in log.entries().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "({},{})", epoch, plain_decimal(loss));
    }
    out
}

/// A 640x480 line chart of loss versus epoch, with axis lines, extreme-value
/// tick labels, per-epoch markers, and a polyline through the points.
pub fn loss_chart_svg(log: &EpochLossLog) -> String {
    assert!(!log.is_empty(), "chart needs at least one epoch");
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 40.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let entries = log.entries();
    let e0 = entries[0].0 as f64;
    let e1 = entries[entries.len() - 1].0 as f64;
    let e_span = if e1 > e0 { e1 - e0 } else { 1.0 };
    let loss_max = entries.iter().map(|&(_, l)| l).fold(0.0, f64::max);
    let l_span = if loss_max > 0.0 { loss_max } else { 1.0 };

    let px = |e: f64| LEFT + (e - e0) / e_span * plot_w;
    let py = |l: f64| TOP + plot_h - l / l_span * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    // Axis lines.
    let _ = write!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
    );
    // Tick labels at the extremes, plus axis titles.
    let _ = write!(
        svg,
        "<text x=\"{LEFT}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">0</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n\
         <text x=\"15\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.2})\">loss</text>\n",
        TOP + plot_h + 16.0,
        entries[0].0,
        LEFT + plot_w,
        TOP + plot_h + 16.0,
        entries[entries.len() - 1].0,
        LEFT - 6.0,
        TOP + 4.0,
        plain_decimal(loss_max),
        LEFT - 6.0,
        TOP + plot_h + 4.0,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 32.0,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
    );
    if entries.len() > 1 {
        let mut points = String::new();
        for (i, &(epoch, loss)) in entries.iter().enumerate() {
            if i > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", px(epoch as f64), py(loss));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>"
        );
    }
    for &(epoch, loss) in entries {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>",
            px(epoch as f64),
            py(loss)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

const CLASS_POS_COLOR: &str = "#1f77b4";
const CLASS_NEG_COLOR: &str = "#d62728";

/// A 480x480 scatter over the unit disk (10% padding), label +1 in blue and
/// -1 in red, y axis pointing up.
pub fn scatter_svg(samples: &[Sample]) -> String {
    assert!(!samples.is_empty(), "scatter needs at least one point");
    let mut svg = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"-1.1 -1.1 2.2 2.2\">\n\
         <rect x=\"-1.1\" y=\"-1.1\" width=\"2.2\" height=\"2.2\" fill=\"white\"/>\n\
         <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"0.005\"/>\n",
    );
    for s in samples {
        let color = if s.label == 1 {
            CLASS_POS_COLOR
        } else {
            CLASS_NEG_COLOR
        };
        // SVG y grows downward; flip so the y axis points up.
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"0.02\" fill=\"{color}\"/>",
            s.x,
            0.0 - s.y,
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_file(path: &Path, content: &str) -> Result<(), PlotError> {
    std::fs::write(path, content).map_err(|source| PlotError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the coordinate text to `path` and an SVG chart of the same curve
/// alongside it (same name, `.svg` extension). Returns both artifacts.
pub fn emit_loss_plot(log: &EpochLossLog, path: &Path) -> Result<Vec<PlotArtifact>, PlotError> {
    if log.is_empty() {
        return Err(PlotError::EmptyLog);
    }
    let coords = loss_coordinates(log);
    write_file(path, &coords)?;
    let svg_path = path.with_extension("svg");
    let svg = loss_chart_svg(log);
    write_file(&svg_path, &svg)?;
    Ok(vec![
        PlotArtifact {
            kind: PlotKind::LossCurve,
            path: path.to_path_buf(),
            payload: coords,
        },
        PlotArtifact {
            kind: PlotKind::LossCurve,
            path: svg_path,
            payload: svg,
        },
    ])
}

/// Writes the scatter SVG for a labelled (or predicted) sample list.
pub fn emit_scatter_plot(samples: &[Sample], path: &Path) -> Result<PlotArtifact, PlotError> {
    if samples.is_empty() {
        return Err(PlotError::EmptySamples);
    }
    let svg = scatter_svg(samples);
    write_file(path, &svg)?;
    Ok(PlotArtifact {
        kind: PlotKind::Scatter,
        path: path.to_path_buf(),
        payload: svg,
    })
}
