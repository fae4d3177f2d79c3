//! Rule-based reading of curve shapes.
//!
//! Each curve's flattening is measured by the least-squares slope over its last
//! third of points divided by the slope over its first third. A curve that is
//! already flat at the start has nothing left to lose: its ratio is 0 when it
//! stays flat and 1 when it picks up later.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::measures::{CurvePoint, CurveSet};

use super::ReportError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    /// `overhead_growth` below this maximal-curve ratio.
    pub overhead_ratio: f64,
    /// `parallelism_starved` below this idle-specific ratio.
    pub starved_ratio: f64,
    /// `inflation_saturated` below this inflation-specific ratio.
    pub saturated_ratio: f64,
    /// `slowdown` when the inflation-specific last-third slope is below this.
    pub slowdown_slope: f64,
    /// `sched_overhead` when `(elision - maximal) / linear` at max P exceeds this.
    pub sched_fraction: f64,
    /// Slopes below this count as flat when computing ratios.
    pub flat_slope: f64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            overhead_ratio: 0.5,
            starved_ratio: 0.25,
            saturated_ratio: 0.25,
            slowdown_slope: 0.0,
            sched_fraction: 0.1,
            flat_slope: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    OverheadGrowth,
    ParallelismStarved,
    InflationSaturated,
    Slowdown,
    SchedOverhead,
    Healthy,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::OverheadGrowth => "overhead_growth",
            FindingCode::ParallelismStarved => "parallelism_starved",
            FindingCode::InflationSaturated => "inflation_saturated",
            FindingCode::Slowdown => "slowdown",
            FindingCode::SchedOverhead => "sched_overhead",
            FindingCode::Healthy => "healthy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub evidence: BTreeMap<String, f64>,
    pub message: String,
}

/// Slopes of one curve over its first and last thirds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSlopes {
    pub first_slope: f64,
    pub last_slope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub findings: Vec<Finding>,
    pub slopes: BTreeMap<String, CurveSlopes>,
    /// Gaps A-D at the largest P as fractions of the linear speedup.
    pub gap_fractions: BTreeMap<String, f64>,
    pub max_p: usize,
}

impl Diagnostics {
    pub fn codes(&self) -> Vec<FindingCode> {
        self.findings.iter().map(|f| f.code).collect()
    }

    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.findings {
            let _ = writeln!(out, "{}: {}", f.code.as_str(), f.message);
            for (k, v) in &f.evidence {
                let _ = writeln!(out, "    {k} = {v:.4}");
            }
        }
        let _ = writeln!(out, "gaps at P = {} (fraction of linear):", self.max_p);
        for (k, v) in &self.gap_fractions {
            let _ = writeln!(out, "    {k} = {v:.4}");
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn curve_slopes(points: &[CurvePoint], value: impl Fn(&CurvePoint) -> f64, flat: f64) -> Option<CurveSlopes> {
    let n = points.len();
    let k = n.div_ceil(3).max(2);
    let xs: Vec<f64> = points.iter().map(|c| c.p as f64).collect();
    let ys: Vec<f64> = points.iter().map(value).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    let first_slope = slope(&xs[..k], &ys[..k]);
    let last_slope = slope(&xs[n - k..], &ys[n - k..]);
    let ratio = if first_slope < flat {
        if last_slope < flat {
            0.0
        } else {
            1.0
        }
    } else {
        last_slope / first_slope
    };
    Some(CurveSlopes { first_slope, last_slope, ratio })
}

pub fn diagnose(curves: &CurveSet) -> Result<Diagnostics, ReportError> {
    diagnose_with(curves, &DiagnoseConfig::default())
}

/// Classifies the curve shapes. Pure: everything is recomputed from `curves`.
pub fn diagnose_with(curves: &CurveSet, cfg: &DiagnoseConfig) -> Result<Diagnostics, ReportError> {
    let points = curves.points();
    if points.len() < 3 {
        return Err(ReportError::TooFewPoints(points.len()));
    }
    let flat = cfg.flat_slope;
    let mut slopes = BTreeMap::new();
    let maximal = curve_slopes(points, |c| c.maximal, flat);
    let idle = curve_slopes(points, |c| c.idle_specific, flat);
    let infl = curve_slopes(points, |c| c.inflation_specific, flat);
    let actual = curve_slopes(points, |c| c.actual, flat);
    for (name, s) in [("maximal", maximal), ("idle_specific", idle), ("inflation_specific", infl), ("actual", actual)] {
        if let Some(s) = s {
            slopes.insert(name.to_string(), s);
        }
    }

    let evidence = |pairs: &[(&str, &CurveSlopes)]| -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        for (name, s) in pairs {
            m.insert(format!("{name}.first_slope"), s.first_slope);
            m.insert(format!("{name}.last_slope"), s.last_slope);
            m.insert(format!("{name}.ratio"), s.ratio);
        }
        m
    };

    let mut findings = Vec::new();
    let max_ok = maximal.map(|m| m.ratio >= cfg.overhead_ratio);
    if let Some(m) = &maximal {
        if m.ratio < cfg.overhead_ratio {
            findings.push(Finding {
                code: FindingCode::OverheadGrowth,
                evidence: evidence(&[("maximal", m)]),
                message: "maximal speedup flattens: one-core overheads grow with P".into(),
            });
        }
    }
    if let (Some(m), Some(i), Some(true)) = (&maximal, &idle, max_ok) {
        if i.ratio < cfg.starved_ratio {
            findings.push(Finding {
                code: FindingCode::ParallelismStarved,
                evidence: evidence(&[("idle_specific", i), ("maximal", m)]),
                message: "idle-time specific speedup flattens while maximal keeps rising: not enough parallelism"
                    .into(),
            });
        }
    }
    if let Some(f) = &infl {
        if f.last_slope < cfg.slowdown_slope {
            findings.push(Finding {
                code: FindingCode::Slowdown,
                evidence: evidence(&[("inflation_specific", f)]),
                message: "inflation-specific speedup slopes downwards: adding cores slows the work down".into(),
            });
        } else if let (Some(m), Some(true)) = (&maximal, max_ok) {
            if f.ratio < cfg.saturated_ratio {
                findings.push(Finding {
                    code: FindingCode::InflationSaturated,
                    evidence: evidence(&[("inflation_specific", f), ("maximal", m)]),
                    message: "inflation-specific speedup flattens: added processor time turns into work inflation"
                        .into(),
                });
            }
        }
    }
    let last = points.last().expect("at least three points");
    if let Some(eb) = last.elision_bound {
        let frac = (eb - last.maximal) / last.linear;
        if frac > cfg.sched_fraction {
            let mut ev = BTreeMap::new();
            ev.insert("elision_minus_maximal_over_linear".to_string(), frac);
            findings.push(Finding {
                code: FindingCode::SchedOverhead,
                evidence: ev,
                message: "the sequential elision is much faster than the one-core run: scheduling costs dominate"
                    .into(),
            });
        }
    }
    if findings.is_empty() {
        findings.push(Finding {
            code: FindingCode::Healthy,
            evidence: slopes.iter().map(|(k, s)| (format!("{k}.ratio"), s.ratio)).collect(),
            message: "no curve flattens or bends down".into(),
        });
    }

    let mut gap_fractions = BTreeMap::new();
    let gaps = curves.gaps();
    let g = gaps.last().expect("non-empty");
    for (name, v) in [("A", g.a), ("B", g.b), ("C", g.c), ("D", g.d)] {
        gap_fractions.insert(name.to_string(), v / last.linear);
    }

    Ok(Diagnostics { findings, slopes, gap_fractions, max_p: last.p })
}
