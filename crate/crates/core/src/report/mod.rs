//! CSV and SVG output for speedup curves, and curvature diagnostics.

mod csv;
mod diagnose;
mod svg;

use thiserror::Error;

pub use csv::{emit_csv, format_sig, parse_csv, CSV_DIGITS, CSV_HEADER};
pub use diagnose::{diagnose, diagnose_with, CurveSlopes, DiagnoseConfig, Diagnostics, Finding, FindingCode};
pub use svg::{emit_svg, Curve, PlotSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no curve points")]
    Empty,
    #[error("curvature needs at least 3 worker counts, got {0}")]
    TooFewPoints(usize),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}
