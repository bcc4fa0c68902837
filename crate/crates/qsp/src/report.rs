//! Persistence for experiment outputs: sweep records as CSV, radial field
//! dumps as plain text, and simple SVG line charts.
//!
//! All floating-point values are written with 17 significant digits so that
//! a write/parse round trip reproduces the original `f64` bit for bit.  Text
//! outputs use LF line endings only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Column order of every sweep CSV.  `param` is the swept quantity (a
/// coupling strength or a quasilinear strength depending on the experiment),
/// `x_norm` is the natural-space norm of the potential, and `seconds` is the
/// wall-clock time of the saddle search that produced the row.
pub const CSV_HEADER: &str = "param,level,h1_norm,x_norm,phi_inf,u_inf,grad_norm,converged,seconds";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("refusing to emit a CSV with no records")]
    EmptyRecords,
    #[error("bad CSV header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("bad CSV row at line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("bad field dump at line {line}: {reason}")]
    BadDump { line: usize, reason: String },
    #[error("chart has no finite data points")]
    EmptyChart,
}

/// One row of a sweep CSV: the scalar diagnostics of a single saddle search.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub param: f64,
    pub level: f64,
    pub h1_norm: f64,
    pub x_norm: f64,
    pub phi_inf: f64,
    pub u_inf: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub seconds: f64,
}

/// Formats a float with 17 significant digits, enough to round-trip any
/// finite `f64` exactly.
pub fn format_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders records as CSV text with the exact canonical header.
pub fn render_csv(records: &[SweepRecord]) -> Result<String, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyRecords);
    }
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_full(r.param),
            format_full(r.level),
            format_full(r.h1_norm),
            format_full(r.x_norm),
            format_full(r.phi_inf),
            format_full(r.u_inf),
            format_full(r.grad_norm),
            r.converged,
            format_full(r.seconds),
        );
    }
    Ok(out)
}

/// Writes records to `path` as CSV.  Errors on an empty record list rather
/// than emitting a header-only file.
pub fn emit_csv(records: &[SweepRecord], path: &Path) -> Result<(), ReportError> {
    let text = render_csv(records)?;
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses CSV text produced by [`render_csv`] back into records at full
/// precision.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>, ReportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| ReportError::BadHeader {
        expected: CSV_HEADER.to_string(),
        found: String::new(),
    })?;
    if header != CSV_HEADER {
        return Err(ReportError::BadHeader {
            expected: CSV_HEADER.to_string(),
            found: header.to_string(),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 9 {
            return Err(ReportError::BadRow {
                line: line_no,
                reason: format!("expected 9 cells, found {}", cells.len()),
            });
        }
        let num = |i: usize| -> Result<f64, ReportError> {
            cells[i].parse::<f64>().map_err(|e| ReportError::BadRow {
                line: line_no,
                reason: format!("cell {}: {e}", i + 1),
            })
        };
        let converged = match cells[7] {
            "true" => true,
            "false" => false,
            other => {
                return Err(ReportError::BadRow {
                    line: line_no,
                    reason: format!("converged cell must be true or false, found {other:?}"),
                })
            }
        };
        records.push(SweepRecord {
            param: num(0)?,
            level: num(1)?,
            h1_norm: num(2)?,
            x_norm: num(3)?,
            phi_inf: num(4)?,
            u_inf: num(5)?,
            grad_norm: num(6)?,
            converged,
            seconds: num(8)?,
        });
    }
    if records.is_empty() {
        return Err(ReportError::EmptyRecords);
    }
    Ok(records)
}

/// Reads a CSV file from disk.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}

/// A radial field dump: the grid header plus node values from r = 0 to r = R.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub r_max: f64,
    pub intervals: usize,
    pub values: Vec<f64>,
}

/// Renders a field dump: two header comment lines fixing the grid, then one
/// node value per line.
pub fn render_field_dump(r_max: f64, values: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# R = {}", format_full(r_max));
    let _ = writeln!(out, "# N = {}", values.len() - 1);
    for v in values {
        out.push_str(&format_full(*v));
        out.push('\n');
    }
    out
}

/// Writes node values with the grid header to `path`.
pub fn write_field_dump(r_max: f64, values: &[f64], path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, render_field_dump(r_max, values)).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a field dump produced by [`render_field_dump`].
pub fn parse_field_dump(text: &str) -> Result<FieldDump, ReportError> {
    let mut r_max: Option<f64> = None;
    let mut intervals: Option<usize> = None;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("R =") {
                r_max = Some(v.trim().parse().map_err(|e| ReportError::BadDump {
                    line: line_no,
                    reason: format!("bad R header: {e}"),
                })?);
            } else if let Some(v) = rest.strip_prefix("N =") {
                intervals = Some(v.trim().parse().map_err(|e| ReportError::BadDump {
                    line: line_no,
                    reason: format!("bad N header: {e}"),
                })?);
            } else {
                return Err(ReportError::BadDump {
                    line: line_no,
                    reason: format!("unknown header line {line:?}"),
                });
            }
            continue;
        }
        values.push(line.parse().map_err(|e| ReportError::BadDump {
            line: line_no,
            reason: format!("bad value: {e}"),
        })?);
    }
    let r_max = r_max.ok_or(ReportError::BadDump {
        line: 0,
        reason: "missing R header".to_string(),
    })?;
    let intervals = intervals.ok_or(ReportError::BadDump {
        line: 0,
        reason: "missing N header".to_string(),
    })?;
    if values.len() != intervals + 1 {
        return Err(ReportError::BadDump {
            line: 0,
            reason: format!(
                "header declares N = {intervals} so {} values are expected, found {}",
                intervals + 1,
                values.len()
            ),
        });
    }
    Ok(FieldDump {
        r_max,
        intervals,
        values,
    })
}

/// Reads a field dump file from disk.
pub fn read_field_dump(path: &Path) -> Result<FieldDump, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_field_dump(&text)
}

/// One labelled polyline for an SVG chart.
#[derive(Debug, Clone)]
pub struct SvgSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A self-contained line chart.  Log axes take base-10 logs of coordinates
/// and silently skip nonpositive points.
#[derive(Debug, Clone)]
pub struct SvgChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<SvgSeries>,
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 420.0;
const SVG_MARGIN_LEFT: f64 = 70.0;
const SVG_MARGIN_RIGHT: f64 = 20.0;
const SVG_MARGIN_TOP: f64 = 40.0;
const SVG_MARGIN_BOTTOM: f64 = 50.0;
const SVG_PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the chart as a standalone SVG document with inline styling and no
/// external references.
pub fn render_svg(chart: &SvgChart) -> Result<String, ReportError> {
    let map_pt = |&(x, y): &(f64, f64)| -> Option<(f64, f64)> {
        let x = if chart.log_x {
            if x > 0.0 {
                x.log10()
            } else {
                return None;
            }
        } else {
            x
        };
        let y = if chart.log_y {
            if y > 0.0 {
                y.log10()
            } else {
                return None;
            }
        } else {
            y
        };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    };
    let mapped: Vec<Vec<(f64, f64)>> = chart
        .series
        .iter()
        .map(|s| s.points.iter().filter_map(map_pt).collect())
        .collect();
    let all: Vec<(f64, f64)> = mapped.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(ReportError::EmptyChart);
    }
    let (mut x_lo, mut x_hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let (mut y_lo, mut y_hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    if x_hi - x_lo < 1e-300 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-300 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let plot_w = SVG_WIDTH - SVG_MARGIN_LEFT - SVG_MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - SVG_MARGIN_TOP - SVG_MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            SVG_MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w,
            SVG_MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h,
        )
    };
    let axis_label = |v: f64, log: bool| -> String {
        if log {
            format!("1e{v:.2}")
        } else {
            format!("{v:.4}")
        }
    };

    let mut out = String::new();
    out.push_str(r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    out.push('\n');
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-family="monospace" font-size="15" text-anchor="middle">{}</text>"#,
        SVG_MARGIN_LEFT + plot_w / 2.0,
        escape_xml(&chart.title)
    );
    // Axes.
    let (x0, y0) = (SVG_MARGIN_LEFT, SVG_MARGIN_TOP + plot_h);
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{:.1}" y2="{y0}" stroke="black"/>"#,
        x0 + plot_w
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{SVG_MARGIN_TOP}" stroke="black"/>"#
    );
    // Tick labels at the axis extremes.
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
        y0 + 18.0,
        axis_label(x_lo, chart.log_x)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
        x0 + plot_w,
        y0 + 18.0,
        axis_label(x_hi, chart.log_x)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
        x0 - 6.0,
        y0,
        axis_label(y_lo, chart.log_y)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
        x0 - 6.0,
        SVG_MARGIN_TOP + 4.0,
        axis_label(y_hi, chart.log_y)
    );
    // Axis titles.
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle">{}</text>"#,
        x0 + plot_w / 2.0,
        y0 + 36.0,
        escape_xml(&chart.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        SVG_MARGIN_TOP + plot_h / 2.0,
        SVG_MARGIN_TOP + plot_h / 2.0,
        escape_xml(&chart.y_label)
    );
    // Polylines and legend.
    for (i, (series, pts)) in chart.series.iter().zip(&mapped).enumerate() {
        let color = SVG_PALETTE[i % SVG_PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
            for &(x, y) in pts {
                let (px, py) = to_px(x, y);
                let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{color}"/>"#);
            }
        }
        let ly = SVG_MARGIN_TOP + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" font-family="monospace" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            SVG_MARGIN_LEFT + plot_w - 4.0,
            escape_xml(&series.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the chart to `path`.
pub fn emit_svg(chart: &SvgChart, path: &Path) -> Result<(), ReportError> {
    let text = render_svg(chart)?;
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}
