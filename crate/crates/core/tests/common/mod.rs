#![allow(dead_code)]

use std::collections::BTreeMap;

use facspeed::measures::{speedup_curves, CurveSet, MeasureSummary, OneCoreTime, PerPMeasure};
use facspeed::report::Curve;
use proptest::prelude::*;

/// Summary from explicit `(P, T_P, I_P)` triples with a fixed one-core time.
pub fn summary(t_s: f64, t_1: f64, elision: Option<f64>, pts: &[(usize, f64, f64)]) -> MeasureSummary {
    MeasureSummary {
        baseline_time: t_s,
        one_core_time: OneCoreTime::Fixed(t_1),
        elision_time: elision,
        per_p: pts
            .iter()
            .map(|&(p, t_p, i_p)| (p, PerPMeasure { parallel_time: t_p, idle_time: i_p, sample_count: 1 }))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Summary built from idle time and inflation per P: `T_P = (T_1 + I_P + F_P) / P`.
pub fn summary_from_losses(t_s: f64, t_1: f64, elision: Option<f64>, losses: &[(usize, f64, f64)]) -> MeasureSummary {
    let pts: Vec<(usize, f64, f64)> = losses.iter().map(|&(p, i, f)| (p, (t_1 + i + f) / p as f64, i)).collect();
    summary(t_s, t_1, elision, &pts)
}

/// Curves shaped like the textbook picture: every loss present and growing.
pub fn lossy_curves() -> CurveSet {
    let t_1 = 1.25;
    let losses: Vec<(usize, f64, f64)> = [1usize, 2, 4, 8, 16]
        .iter()
        .map(|&p| {
            let pf = p as f64;
            (p, 0.05 * t_1 * pf * pf, 0.1 * t_1 * pf)
        })
        .collect();
    speedup_curves(&summary_from_losses(1.0, t_1, Some(1.1), &losses)).unwrap()
}

pub fn perfect_curves(procs: &[usize]) -> CurveSet {
    let pts: Vec<(usize, f64, f64)> = procs.iter().map(|&p| (p, 1.0 / p as f64, 0.0)).collect();
    speedup_curves(&summary(1.0, 1.0, None, &pts)).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Random valid summary: positive times, idle within capacity, inflation may be negative.
pub fn summaries() -> impl Strategy<Value = MeasureSummary> {
    (1e-3f64..1e3, 0.5f64..3.0, prop::collection::btree_map(1usize..=64, (0.0f64..3.0, -0.3f64..2.0), 1..8)).prop_map(
        |(t_s, k1, per)| {
            let t_1 = t_s * k1;
            let losses: Vec<(usize, f64, f64)> =
                per.into_iter().map(|(p, (ifrac, ffrac))| (p, ifrac * t_1 * (p as f64 - 1.0), ffrac * t_1)).collect();
            summary_from_losses(t_s, t_1, Some(t_1 * 0.9), &losses)
        },
    )
}

/// Pixel transform read back from the rendered document.
pub struct Transform {
    pub x_max: f64,
    pub y_max: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

impl Transform {
    pub fn read(doc: &roxmltree::Document) -> Transform {
        let g = doc.descendants().find(|n| n.attribute("id") == Some("plot")).expect("plot group");
        let a = |k: &str| g.attribute(k).unwrap().parse::<f64>().unwrap();
        Transform {
            x_max: a("data-x-max"),
            y_max: a("data-y-max"),
            left: a("data-px-left"),
            right: a("data-px-right"),
            top: a("data-px-top"),
            bottom: a("data-px-bottom"),
        }
    }

    pub fn px(&self, p: f64, v: f64) -> (f64, f64) {
        (self.left + p / self.x_max * (self.right - self.left), self.bottom - v / self.y_max * (self.bottom - self.top))
    }
}

pub fn polyline(doc: &roxmltree::Document, curve: Curve) -> Option<Vec<(f64, f64)>> {
    let id = format!("curve-{}", curve.key());
    let node = doc.descendants().find(|n| n.attribute("id") == Some(id.as_str()))?;
    Some(
        node.attribute("points")
            .unwrap()
            .split_whitespace()
            .map(|pair| {
                let (x, y) = pair.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect(),
    )
}
