//! Turns raw timings into parallel work, work inflation, and the factored
//! speedup curves.
//!
//! Notation: `T_s` baseline time, `T_1` one-core time of the parallel program,
//! `T_P` and `I_P` wall time and total idle time on P workers. Then
//! `W_P = P*T_P - I_P` and `F_P = W_P - T_1`, so `T_P = (T_1 + I_P + F_P) / P`.
//! All functions here are pure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::RunSample;

/// Relative slack allowed when checking `I_P <= P * T_P` on float seconds.
const IDLE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("idle time {idle} exceeds P*T_P = {capacity} (P = {p})")]
    InconsistentSample { p: usize, idle: f64, capacity: f64 },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("no samples to aggregate")]
    EmptySamples,
    #[error("samples mix worker counts {0} and {1}")]
    MixedProcs(usize, usize),
    #[error("samples mix benchmark configurations")]
    MixedConfigs,
    #[error("no one-core time for P = {0}")]
    MissingOneCore(usize),
    #[error("summary has no parallel measurements")]
    NoPoints,
    #[error("curve points must have strictly increasing P")]
    UnsortedPoints,
}

fn check_positive(what: &'static str, value: f64) -> Result<(), MeasureError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(MeasureError::NonPositive { what, value })
    }
}

fn check_idle(p: usize, t_p: f64, i_p: f64) -> Result<(), MeasureError> {
    check_positive("parallel time", t_p)?;
    let capacity = p as f64 * t_p;
    if i_p.is_nan() || i_p < 0.0 || i_p > capacity * (1.0 + IDLE_SLACK) {
        return Err(MeasureError::InconsistentSample { p, idle: i_p, capacity });
    }
    Ok(())
}

/// `W_P = P*T_P - I_P`.
pub fn parallel_work(p: usize, t_p: f64, i_p: f64) -> Result<f64, MeasureError> {
    check_idle(p, t_p, i_p)?;
    Ok((p as f64 * t_p - i_p).max(0.0))
}

/// `F_P = P*T_P - I_P - T_1`. Negative values (deflation) are returned as is.
pub fn work_inflation(p: usize, t_p: f64, i_p: f64, t_1: f64) -> Result<f64, MeasureError> {
    check_positive("one-core time", t_1)?;
    Ok(parallel_work(p, t_p, i_p)? - t_1)
}

/// Mean wall time and idle time over repeated runs of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub t_p: f64,
    pub i_p: f64,
    pub sample_count: usize,
}

/// Arithmetic means of wall and idle time. Speedups downstream are ratios of
/// these means, never means of per-sample ratios.
pub fn aggregate(samples: &[RunSample]) -> Result<Aggregate, MeasureError> {
    let first = samples.first().ok_or(MeasureError::EmptySamples)?;
    for s in samples {
        if s.p != first.p {
            return Err(MeasureError::MixedProcs(first.p, s.p));
        }
        if s.benchmark_id != first.benchmark_id || s.params != first.params {
            return Err(MeasureError::MixedConfigs);
        }
    }
    let n = samples.len() as f64;
    Ok(Aggregate {
        t_p: samples.iter().map(|s| s.wall_time).sum::<f64>() / n,
        i_p: samples.iter().map(|s| s.idle_time).sum::<f64>() / n,
        sample_count: samples.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneCoreTime {
    Fixed(f64),
    /// `T_1^P`: a one-core run per P with that P's parameter set.
    PerP(BTreeMap<usize, f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerPMeasure {
    pub parallel_time: f64,
    pub idle_time: f64,
    pub sample_count: usize,
}

impl From<Aggregate> for PerPMeasure {
    fn from(a: Aggregate) -> Self {
        PerPMeasure { parallel_time: a.t_p, idle_time: a.i_p, sample_count: a.sample_count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub baseline_time: f64,
    pub one_core_time: OneCoreTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elision_time: Option<f64>,
    pub per_p: BTreeMap<usize, PerPMeasure>,
}

impl MeasureSummary {
    pub fn one_core_for(&self, p: usize) -> Result<f64, MeasureError> {
        match &self.one_core_time {
            OneCoreTime::Fixed(t) => Ok(*t),
            OneCoreTime::PerP(m) => m.get(&p).copied().ok_or(MeasureError::MissingOneCore(p)),
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        check_positive("baseline time", self.baseline_time)?;
        if let Some(e) = self.elision_time {
            check_positive("elision time", e)?;
        }
        if let OneCoreTime::Fixed(t) = self.one_core_time {
            check_positive("one-core time", t)?;
        }
        for (&p, m) in &self.per_p {
            if p == 0 {
                return Err(MeasureError::NonPositive { what: "worker count", value: 0.0 });
            }
            check_idle(p, m.parallel_time, m.idle_time)?;
            check_positive("one-core time", self.one_core_for(p)?)?;
        }
        Ok(())
    }

    /// Returns a copy with every time multiplied by `k`.
    pub fn scaled(&self, k: f64) -> MeasureSummary {
        MeasureSummary {
            baseline_time: self.baseline_time * k,
            one_core_time: match &self.one_core_time {
                OneCoreTime::Fixed(t) => OneCoreTime::Fixed(t * k),
                OneCoreTime::PerP(m) => OneCoreTime::PerP(m.iter().map(|(&p, t)| (p, t * k)).collect()),
            },
            elision_time: self.elision_time.map(|e| e * k),
            per_p: self
                .per_p
                .iter()
                .map(|(&p, m)| {
                    (p, PerPMeasure { parallel_time: m.parallel_time * k, idle_time: m.idle_time * k, ..*m })
                })
                .collect(),
        }
    }
}

/// One-core scheduling work estimate `S_1 ~ T_1 - T_elision`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedWork {
    pub value: f64,
    /// The elision measured slower than the one-core run; `value` was clamped to 0.
    pub noisy: bool,
}

pub fn sched_work_estimate(t_1: f64, t_elision: f64) -> SchedWork {
    let d = t_1 - t_elision;
    if d < 0.0 {
        SchedWork { value: 0.0, noisy: true }
    } else {
        SchedWork { value: d, noisy: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: usize,
    pub linear: f64,
    pub maximal: f64,
    pub idle_specific: f64,
    /// `f64::INFINITY` when `P*T_P == I_P` (see `unbounded_inflation`).
    pub inflation_specific: f64,
    pub actual: f64,
    pub elision_bound: Option<f64>,
    pub work_inflation: f64,
    pub parallel_work: f64,
    pub sched_work_estimate: Option<SchedWork>,
    pub unbounded_inflation: bool,
}

/// Speedup lost between adjacent curves at one P, in speedup units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaps {
    pub p: usize,
    /// linear - maximal
    pub a: f64,
    /// maximal - idle-specific
    pub b: f64,
    /// maximal - inflation-specific
    pub c: f64,
    /// maximal - actual
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    points: Vec<CurvePoint>,
}

impl CurveSet {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self, MeasureError> {
        if points.windows(2).any(|w| w[0].p >= w[1].p) {
            return Err(MeasureError::UnsortedPoints);
        }
        Ok(CurveSet { points })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn has_elision(&self) -> bool {
        self.points.iter().any(|p| p.elision_bound.is_some())
    }

    /// Gap magnitudes, always derived from the current points.
    pub fn gaps(&self) -> Vec<Gaps> {
        self.points
            .iter()
            .map(|c| Gaps {
                p: c.p,
                a: c.linear - c.maximal,
                b: c.maximal - c.idle_specific,
                c: c.maximal - c.inflation_specific,
                d: c.maximal - c.actual,
            })
            .collect()
    }
}

/// Builds every curve point of a summary.
pub fn speedup_curves(summary: &MeasureSummary) -> Result<CurveSet, MeasureError> {
    summary.validate()?;
    if summary.per_p.is_empty() {
        return Err(MeasureError::NoPoints);
    }
    let t_s = summary.baseline_time;
    let mut points = Vec::with_capacity(summary.per_p.len());
    for (&p, m) in &summary.per_p {
        let pf = p as f64;
        let t_1 = summary.one_core_for(p)?;
        let (t_p, i_p) = (m.parallel_time, m.idle_time);
        let w_p = parallel_work(p, t_p, i_p)?;
        let f_p = w_p - t_1;
        let unbounded = w_p <= 0.0;
        points.push(CurvePoint {
            p,
            linear: pf,
            maximal: pf * t_s / t_1,
            idle_specific: pf * t_s / (t_1 + i_p),
            inflation_specific: if unbounded { f64::INFINITY } else { pf * t_s / w_p },
            actual: t_s / t_p,
            elision_bound: summary.elision_time.map(|e| pf * t_s / e),
            work_inflation: f_p,
            parallel_work: w_p,
            sched_work_estimate: summary.elision_time.map(|e| sched_work_estimate(t_1, e)),
            unbounded_inflation: unbounded,
        });
        if unbounded {
            log::warn!("P = {p}: all processor time idle, inflation-specific speedup unbounded");
        }
    }
    CurveSet::new(points)
}
