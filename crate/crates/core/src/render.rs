//! Metro-map diagrams: interrelation detection plus DOT and standalone SVG
//! emitters.
//!
//! Layout is a fixed grid — line i on row i, stop j in column j — so output
//! is deterministic and testable. Interrelations (stops shared by two or
//! more lines) are drawn as arcs between the matching stop coordinates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::dot_quote;
use crate::metromap::MetroMap;
use crate::transactions::AttributeToken;

/// Line colors, cycled when a map has more lines than the palette.
pub const PALETTE: [&str; 12] = [
    "#e6194b", "#3cb44b", "#c8a211", "#4363d8", "#f58231", "#911eb4", "#2aa8c0", "#f032e6",
    "#7a9e2f", "#8b5e3c", "#469990", "#7661c9",
];

/// Hard cap on rendered lines for the SVG emitter.
pub const MAX_SVG_LINES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("map has {0} lines; the SVG renderer supports at most {MAX_SVG_LINES}")]
    TooManyLines(usize),
}

/// A stop occurring on two or more lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interrelation {
    pub stop: AttributeToken,
    /// Indices of every line the stop occurs on, ascending. Always >= 2.
    pub lines: Vec<usize>,
}

/// Every token appearing on at least two lines, with the full set of line
/// indices, ordered by first appearance in line-then-stop order.
pub fn find_interrelations(map: &MetroMap) -> Vec<Interrelation> {
    let mut occurrences: BTreeMap<&AttributeToken, Vec<usize>> = BTreeMap::new();
    let mut first_seen: Vec<&AttributeToken> = Vec::new();
    for (line_idx, line) in map.lines.iter().enumerate() {
        for stop in line.stops() {
            let entry = occurrences.entry(stop).or_insert_with(|| {
                first_seen.push(stop);
                Vec::new()
            });
            if entry.last() != Some(&line_idx) {
                entry.push(line_idx);
            }
        }
    }
    first_seen
        .into_iter()
        .filter(|stop| occurrences[stop].len() >= 2)
        .map(|stop| Interrelation {
            stop: stop.clone(),
            lines: occurrences[stop].clone(),
        })
        .collect()
}

/// A laid-out map: ordered stops per line, a color index per line, and the
/// interrelation arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    pub lines: Vec<DiagramLine>,
    pub arcs: Vec<Interrelation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramLine {
    pub stops: Vec<AttributeToken>,
    pub color_index: usize,
}

pub fn build_diagram(map: &MetroMap) -> Diagram {
    Diagram {
        lines: map
            .lines
            .iter()
            .enumerate()
            .map(|(idx, line)| DiagramLine {
                stops: line.stops().into_iter().cloned().collect(),
                color_index: idx % PALETTE.len(),
            })
            .collect(),
        arcs: find_interrelations(map),
    }
}

/// DOT digraph: one color-attributed edge chain per line; shared stops are
/// declared exactly once. Identical maps produce byte-identical output.
pub fn render_dot(map: &MetroMap) -> String {
    let diagram = build_diagram(map);
    let mut out = String::from("digraph metromap {\n  rankdir=LR;\n  node [shape=ellipse];\n");
    let mut declared: Vec<&AttributeToken> = Vec::new();
    for line in &diagram.lines {
        for stop in &line.stops {
            if !declared.contains(&stop) {
                declared.push(stop);
                let _ = writeln!(out, "  {};", dot_quote(stop.as_str()));
            }
        }
    }
    for line in &diagram.lines {
        let color = PALETTE[line.color_index];
        for pair in line.stops.windows(2) {
            let _ = writeln!(
                out,
                "  {} -> {} [color=\"{color}\", penwidth=2];",
                dot_quote(pair[0].as_str()),
                dot_quote(pair[1].as_str()),
            );
        }
    }
    out.push_str("}\n");
    out
}

const MARGIN: f64 = 60.0;
const COL_SPACING: f64 = 170.0;
const ROW_SPACING: f64 = 90.0;
const STOP_RADIUS: f64 = 7.0;
const TERMINUS_RADIUS: f64 = 10.0;

/// Standalone SVG: each line a horizontal polyline of evenly spaced stops,
/// interrelations as arcs between the matching stop coordinates, start and
/// final stops emphasized.
pub fn render_svg(map: &MetroMap) -> Result<String, RenderError> {
    if map.lines.len() > MAX_SVG_LINES {
        return Err(RenderError::TooManyLines(map.lines.len()));
    }
    let diagram = build_diagram(map);
    let max_stops = diagram
        .lines
        .iter()
        .map(|l| l.stops.len())
        .max()
        .unwrap_or(0);
    let width = 2.0 * MARGIN + COL_SPACING * max_stops.saturating_sub(1) as f64;
    let height = 2.0 * MARGIN + ROW_SPACING * diagram.lines.len().saturating_sub(1) as f64;
    let position = |line: usize, column: usize| -> (f64, f64) {
        (
            MARGIN + COL_SPACING * column as f64,
            MARGIN + ROW_SPACING * line as f64,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    out.push_str(
        "  <style>\n    text { font-family: sans-serif; font-size: 11px; }\n    \
         .terminus-label { font-weight: bold; }\n    \
         .arc { stroke: #7f7f7f; stroke-width: 1.5; stroke-dasharray: 5 3; fill: none; }\n  </style>\n",
    );

    for (line_idx, line) in diagram.lines.iter().enumerate() {
        let color = PALETTE[line.color_index];
        let points: Vec<String> = (0..line.stops.len())
            .map(|col| {
                let (x, y) = position(line_idx, col);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            out,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"4\"/>",
            points.join(" ")
        );
    }

    for interrelation in &diagram.arcs {
        for pair in interrelation.lines.windows(2) {
            let (from_line, to_line) = (pair[0], pair[1]);
            let from_col = stop_column(&diagram.lines[from_line], &interrelation.stop);
            let to_col = stop_column(&diagram.lines[to_line], &interrelation.stop);
            let (x1, y1) = position(from_line, from_col);
            let (x2, y2) = position(to_line, to_col);
            let mid = (y1 + y2) / 2.0;
            let _ = writeln!(
                out,
                "  <path class=\"arc\" d=\"M {x1},{y1} C {x1},{mid} {x2},{mid} {x2},{y2}\"/>"
            );
        }
    }

    for (line_idx, line) in diagram.lines.iter().enumerate() {
        let color = PALETTE[line.color_index];
        let last = line.stops.len() - 1;
        for (col, stop) in line.stops.iter().enumerate() {
            let (x, y) = position(line_idx, col);
            let is_terminus = col == 0 || col == last;
            let radius = if is_terminus {
                TERMINUS_RADIUS
            } else {
                STOP_RADIUS
            };
            let stroke_width = if is_terminus { 3.0 } else { 2.0 };
            let _ = writeln!(
                out,
                "  <circle cx=\"{x}\" cy=\"{y}\" r=\"{radius}\" fill=\"#ffffff\" stroke=\"{color}\" stroke-width=\"{stroke_width}\"/>"
            );
            let label_class = if is_terminus {
                " class=\"terminus-label\""
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\"{label_class}>{}</text>",
                y + 26.0,
                escape_xml(stop.as_str()),
            );
        }
    }

    out.push_str("</svg>\n");
    Ok(out)
}

fn stop_column(line: &DiagramLine, stop: &AttributeToken) -> usize {
    line.stops
        .iter()
        .position(|s| s == stop)
        .expect("interrelation stops occur on their lines")
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}
