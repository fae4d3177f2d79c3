//! Hand-written SVG for factored speedup plots.
//!
//! Output is byte-stable for equal input. The plot area's data-to-pixel
//! transform is written as `data-*` attributes on `<g id="plot">` so tools can
//! map polyline points back to curve values.

use std::fmt::Write as _;

use crate::measures::{CurvePoint, CurveSet};

use super::ReportError;

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 52.0;

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub curves: CurveSet,
    pub show_elision: bool,
    pub annotate_gaps: bool,
    pub width: u32,
    pub height: u32,
}

impl PlotSpec {
    pub fn new(title: impl Into<String>, curves: CurveSet) -> Self {
        PlotSpec { title: title.into(), curves, show_elision: false, annotate_gaps: false, width: 720, height: 480 }
    }

    pub fn with_elision(mut self, on: bool) -> Self {
        self.show_elision = on;
        self
    }

    pub fn with_gaps(mut self, on: bool) -> Self {
        self.annotate_gaps = on;
        self
    }
}

/// A plotted curve and its drawing style.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    Linear,
    Maximal,
    IdleSpecific,
    InflationSpecific,
    Actual,
    Elision,
}

impl Curve {
    /// Drawing order, top curve first.
    pub const FIVE: [Curve; 5] =
        [Curve::Linear, Curve::Maximal, Curve::IdleSpecific, Curve::InflationSpecific, Curve::Actual];

    pub fn key(self) -> &'static str {
        match self {
            Curve::Linear => "linear",
            Curve::Maximal => "maximal",
            Curve::IdleSpecific => "idle_specific",
            Curve::InflationSpecific => "inflation_specific",
            Curve::Actual => "actual",
            Curve::Elision => "elision_bound",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Curve::Linear => "linear",
            Curve::Maximal => "maximal",
            Curve::IdleSpecific => "idle-time specific",
            Curve::InflationSpecific => "inflation specific",
            Curve::Actual => "actual",
            Curve::Elision => "elision bound",
        }
    }

    pub fn value(self, c: &CurvePoint) -> Option<f64> {
        match self {
            Curve::Linear => Some(c.linear),
            Curve::Maximal => Some(c.maximal),
            Curve::IdleSpecific => Some(c.idle_specific),
            Curve::InflationSpecific => Some(c.inflation_specific),
            Curve::Actual => Some(c.actual),
            Curve::Elision => c.elision_bound,
        }
    }

    fn stroke(self) -> (&'static str, f64, Option<&'static str>) {
        match self {
            Curve::Linear => ("#7f7f7f", 1.0, None),
            Curve::Maximal => ("#000000", 2.0, None),
            Curve::IdleSpecific => ("#1f4e9c", 1.5, None),
            Curve::InflationSpecific => ("#b22222", 1.5, Some("7 4")),
            Curve::Actual => ("#2e7d32", 2.0, None),
            Curve::Elision => ("#6a1b9a", 1.5, Some("2 3")),
        }
    }
}

struct Frame {
    x_max: f64,
    y_max: f64,
    left: f64,
    top: f64,
    plot_w: f64,
    plot_h: f64,
}

impl Frame {
    fn x(&self, p: f64) -> f64 {
        self.left + p / self.x_max * self.plot_w
    }

    fn y(&self, v: f64) -> f64 {
        let v = if v.is_finite() { v.clamp(0.0, self.y_max) } else { self.y_max };
        self.top + self.plot_h - v / self.y_max * self.plot_h
    }
}

/// Smallest of 1, 2, 5 times a power of ten that is at least `v`.
fn nice_ceil(v: f64) -> f64 {
    if v.is_nan() || v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * mag >= v * (1.0 - 1e-12) {
            return m * mag;
        }
    }
    10.0 * mag
}

fn tick_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * mag >= raw * (1.0 - 1e-12) {
            return m * mag;
        }
    }
    10.0 * mag
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn marker(out: &mut String, curve: Curve, x: f64, y: f64) {
    let (color, ..) = curve.stroke();
    match curve {
        Curve::IdleSpecific => {
            let _ = write!(
                out,
                r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{color}" stroke-width="1.5"/>"#,
                x - 4.0,
                y - 4.0,
                x + 4.0,
                y + 4.0,
                x - 4.0,
                y + 4.0,
                x + 4.0,
                y - 4.0
            );
        }
        Curve::Actual => {
            let _ = write!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        _ => {
            let _ = write!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{color}"/>"#);
        }
    }
}

/// Renders the plot as a standalone SVG document.
pub fn emit_svg(spec: &PlotSpec) -> Result<String, ReportError> {
    let points = spec.curves.points();
    if points.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut curves: Vec<Curve> = Curve::FIVE.to_vec();
    if spec.show_elision && spec.curves.has_elision() {
        curves.push(Curve::Elision);
    }

    let max_p = points.iter().map(|c| c.p).max().unwrap_or(1) as f64;
    let y_data_max = points
        .iter()
        .flat_map(|c| curves.iter().filter_map(move |k| k.value(c)))
        .filter(|v| v.is_finite())
        .fold(max_p, f64::max);
    let (w, h) = (spec.width.max(200) as f64, spec.height.max(160) as f64);
    let frame = Frame {
        x_max: nice_ceil(max_p),
        y_max: nice_ceil(y_data_max),
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        plot_w: w - MARGIN_LEFT - MARGIN_RIGHT,
        plot_h: h - MARGIN_TOP - MARGIN_BOTTOM,
    };

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    out.push_str(concat!(
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto-start-reverse\">",
        "<path d=\"M0 0L10 5L0 10z\" fill=\"#444444\"/></marker></defs>\n"
    ));
    let _ = writeln!(out, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text id="title" x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        frame.left + frame.plot_w / 2.0,
        escape(&spec.title)
    );

    // Axes, ticks, labels.
    let (x0, x1, y0, y1) = (frame.x(0.0), frame.x(frame.x_max), frame.y(0.0), frame.y(frame.y_max));
    let _ = writeln!(out, r##"<g id="axes" stroke="#000000" stroke-width="1">"##);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    out.push_str("</g>\n<g id=\"ticks\">\n");
    let xs = tick_step(frame.x_max);
    let mut t = 0.0;
    while t <= frame.x_max * (1.0 + 1e-9) {
        let x = frame.x(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            y0 + 5.0,
            y0 + 18.0,
            fmt_tick(t)
        );
        t += xs;
    }
    let ys = tick_step(frame.y_max);
    let mut t = 0.0;
    while t <= frame.y_max * (1.0 + 1e-9) {
        let y = frame.y(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
        t += ys;
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<text id="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">processors (P)</text>"#,
        frame.left + frame.plot_w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text id="y-label" transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">speedup</text>"#,
        frame.top + frame.plot_h / 2.0
    );

    // Curves.
    let _ = writeln!(
        out,
        r#"<g id="plot" data-x-min="0" data-x-max="{}" data-y-min="0" data-y-max="{}" data-px-left="{:.2}" data-px-right="{:.2}" data-px-top="{:.2}" data-px-bottom="{:.2}">"#,
        frame.x_max, frame.y_max, x0, x1, y1, y0
    );
    let single = points.len() == 1;
    for &curve in &curves {
        let (color, width, dash) = curve.stroke();
        let coords: Vec<(f64, f64)> =
            points.iter().filter_map(|c| curve.value(c).map(|v| (frame.x(c.p as f64), frame.y(v)))).collect();
        if !single {
            let pts: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
            let _ = writeln!(
                out,
                r#"<polyline id="curve-{}" points="{}" fill="none" stroke="{color}" stroke-width="{width}"{dash}/>"#,
                curve.key(),
                pts.join(" ")
            );
        }
        if single || matches!(curve, Curve::IdleSpecific | Curve::Actual) {
            let _ = write!(out, r#"<g id="points-{}">"#, curve.key());
            for &(x, y) in &coords {
                marker(&mut out, curve, x, y);
            }
            out.push_str("</g>\n");
        }
    }
    out.push_str("</g>\n");

    if spec.annotate_gaps {
        gap_arrows(&mut out, &frame, points.last().expect("non-empty"));
    }
    legend(&mut out, &curves, w - MARGIN_RIGHT + 16.0, MARGIN_TOP);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Vertical arrows A-D at the largest P.
fn gap_arrows(out: &mut String, frame: &Frame, last: &CurvePoint) {
    let x = frame.x(last.p as f64);
    let gaps = [
        ("A", last.linear, last.maximal),
        ("B", last.maximal, last.idle_specific),
        ("C", last.maximal, last.inflation_specific),
        ("D", last.maximal, last.actual),
    ];
    out.push_str("<g id=\"gaps\" stroke=\"#444444\" stroke-width=\"1\">\n");
    for (i, (name, from, to)) in gaps.into_iter().enumerate() {
        let gx = x + 10.0 + 12.0 * i as f64;
        let (ya, yb) = (frame.y(from), frame.y(to));
        let _ = writeln!(
            out,
            r##"<line id="gap-{name}" x1="{gx:.2}" y1="{ya:.2}" x2="{gx:.2}" y2="{yb:.2}" marker-end="url(#arrow)"/><text x="{gx:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="#444444" font-size="10">{name}</text>"##,
            ya.min(yb) - 4.0
        );
    }
    out.push_str("</g>\n");
}

fn legend(out: &mut String, curves: &[Curve], x: f64, y: f64) {
    out.push_str("<g id=\"legend\">\n");
    for (i, &curve) in curves.iter().enumerate() {
        let (color, width, dash) = curve.stroke();
        let ly = y + 10.0 + 20.0 * i as f64;
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = write!(
            out,
            r#"<line x1="{x:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="{width}"{dash}/>"#,
            x + 28.0
        );
        if matches!(curve, Curve::IdleSpecific | Curve::Actual) {
            marker(out, curve, x + 14.0, ly);
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 36.0, ly + 4.0, curve.label());
    }
    out.push_str("</g>\n");
}
