//! Minimal deterministic SVG line/marker plots.
//!
//! Output depends only on the input values: fixed palette, fixed layout and
//! fixed-precision coordinates, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

/// Shaded x-interval with a label, e.g. a regime.
#[derive(Debug, Clone, PartialEq)]
pub struct Span {
    pub x0: f64,
    pub x1: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
    pub spans: Vec<Span>,
}

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 340.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const SPAN_FILL: [&str; 3] = ["#e8f0fb", "#eaf6e6", "#fbeaea"];

fn tf(scale: Scale, v: f64) -> Option<f64> {
    match scale {
        Scale::Linear if v.is_finite() => Some(v),
        Scale::Log if v.is_finite() && v > 0.0 => Some(v.log10()),
        _ => None,
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1.0 { 0.1 * lo.abs() } else { 0.5 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn tick_label(scale: Scale, v: f64) -> String {
    match scale {
        Scale::Log => format!("1e{}", v.round() as i64),
        Scale::Linear => {
            let s = format!("{v:.3}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" {
                "0".into()
            } else {
                s.to_string()
            }
        }
    }
}

fn ticks(scale: Scale, lo: f64, hi: f64) -> Vec<f64> {
    match scale {
        Scale::Log => {
            let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
            let step = ((b - a) / 8 + 1).max(1);
            let t: Vec<f64> = (a..=b).step_by(step as usize).map(|k| k as f64).collect();
            if t.is_empty() {
                vec![lo, hi]
            } else {
                t
            }
        }
        Scale::Linear => (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect(),
    }
}

fn render_panel(svg: &mut String, p: &Panel, y0: f64) -> Result<(), CliError> {
    let xs = p.series.iter().flat_map(|s| s.points.iter().filter_map(|&(x, y)| tf(p.y_scale, y).and(tf(p.x_scale, x))));
    let ys = p.series.iter().flat_map(|s| s.points.iter().filter_map(|&(x, y)| tf(p.x_scale, x).and(tf(p.y_scale, y))));
    let (Some((xl, xh)), Some((yl, yh))) = (range(xs), range(ys)) else {
        return Err(CliError::Insufficient(format!("plot panel {:?} has no drawable points", p.title)));
    };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = PANEL_H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - xl) / (xh - xl) * pw;
    let sy = |y: f64| y0 + TOP + ph - (y - yl) / (yh - yl) * ph;

    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        y0 + 22.0,
        escape(&p.title)
    );
    for (i, span) in p.spans.iter().enumerate() {
        let (Some(a), Some(b)) = (tf(p.x_scale, span.x0.max(f64::MIN_POSITIVE)), tf(p.x_scale, span.x1)) else {
            continue;
        };
        let (a, b) = (a.max(xl), b.min(xh));
        if b <= a {
            continue;
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            sx(a),
            y0 + TOP,
            sx(b) - sx(a),
            ph,
            SPAN_FILL[i % SPAN_FILL.len()]
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\" fill=\"#555\">{}</text>",
            (sx(a) + sx(b)) / 2.0,
            y0 + TOP + 12.0,
            escape(&span.label)
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{LEFT:.2}\" y=\"{:.2}\" width=\"{pw:.2}\" height=\"{ph:.2}\" fill=\"none\" stroke=\"#333\"/>",
        y0 + TOP
    );
    for t in ticks(p.x_scale, xl, xh) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            sx(t),
            y0 + TOP + ph + 14.0,
            tick_label(p.x_scale, t)
        );
    }
    for t in ticks(p.y_scale, yl, yh) {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            LEFT - 4.0,
            sy(t) + 3.0,
            tick_label(p.y_scale, t)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        y0 + PANEL_H - 10.0,
        escape(&p.x_label)
    );
    let _ = writeln!(svg, "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>", y0 + TOP + ph / 2.0, y0 + TOP + ph / 2.0, escape(&p.y_label));

    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|&(x, y)| Some((sx(tf(p.x_scale, x)?), sy(tf(p.y_scale, y)?))))
            .filter(|&(x, y)| {
                x >= LEFT - 1e-9 && x <= LEFT + pw + 1e-9 && y >= y0 + TOP - 1e-9 && y <= y0 + TOP + ph + 1e-9
            })
            .collect();
        match s.style {
            Style::Markers => {
                for (x, y) in &pts {
                    let _ = writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"{color}\"/>");
                }
            }
            Style::Line | Style::Dashed if pts.len() >= 2 => {
                let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let dash = if s.style == Style::Dashed { " stroke-dasharray=\"6 4\"" } else { "" };
                let _ = writeln!(
                    svg,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
                    coords.join(" ")
                );
            }
            _ => {}
        }
        let ly = y0 + TOP + 14.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ =
            writeln!(svg, "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{color}\"/>", ly - 9.0);
        let _ =
            writeln!(svg, "<text x=\"{:.2}\" y=\"{ly:.2}\" font-size=\"11\">{}</text>", lx + 14.0, escape(&s.label));
    }
    Ok(())
}

/// SVG document with the panels stacked vertically.
pub fn render(panels: &[Panel]) -> Result<String, CliError> {
    if panels.is_empty() || panels.iter().all(|p| p.series.iter().all(|s| s.points.is_empty())) {
        return Err(CliError::Insufficient("plot has no series".into()));
    }
    let h = PANEL_H * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {WIDTH:.0} {h:.0}\" font-family=\"sans-serif\">");
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut svg, p, PANEL_H * i as f64)?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(panels: &[Panel], path: &Path) -> Result<(), CliError> {
    let svg = render(panels)?;
    std::fs::write(path, svg).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> Panel {
        Panel {
            title: "p(t, 0, r)".into(),
            x_label: "r".into(),
            y_label: "density".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series: vec![
                Series {
                    label: "estimate".into(),
                    points: vec![(1.0, 0.1), (10.0, 1e-3), (100.0, 0.0)],
                    style: Style::Markers,
                },
                Series { label: "upper".into(), points: vec![(1.0, 0.2), (100.0, 1e-6)], style: Style::Line },
            ],
            spans: vec![Span { x0: 0.0, x1: 8.0, label: "on_diagonal".into() }],
        }
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        assert_eq!(render(&[panel()]).unwrap(), render(&[panel()]).unwrap());
        assert!(render(&[panel()]).unwrap().contains("on_diagonal"));
    }

    #[test]
    fn empty_series_is_an_error() {
        let mut p = panel();
        p.series.clear();
        assert!(render(&[p]).is_err());
        assert!(render(&[]).is_err());
    }

    #[test]
    fn linear_ticks_are_trimmed() {
        assert_eq!(tick_label(Scale::Linear, 2.5), "2.5");
        assert_eq!(tick_label(Scale::Linear, 10.0), "10");
        assert_eq!(tick_label(Scale::Log, -3.0), "1e-3");
    }
}
