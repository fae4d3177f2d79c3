use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::measures::{aggregate, MeasureSummary, OneCoreTime, PerPMeasure};

use super::{ExperimentPlan, HarnessError, HostInfo, RunKind, RunSample};

pub const SCHEMA_VERSION: &str = "1.0";
const SCHEMA_MAJOR: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub created: DateTime<Utc>,
    pub tool_version: String,
    pub host: HostInfo,
    /// Whether samples ran in fresh child processes.
    pub isolate: bool,
}

impl Metadata {
    pub fn current(isolate: bool) -> Self {
        Metadata {
            created: Utc::now(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            host: HostInfo::current(),
            isolate,
        }
    }
}

/// A sample that could not be taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: RunKind,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub for_p: Option<usize>,
    pub rep: usize,
    pub message: String,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub schema_version: String,
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ExperimentPlan>,
    #[serde(default)]
    pub samples: Vec<RunSample>,
    #[serde(default)]
    pub failures: Vec<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<MeasureSummary>,
    /// Measurements missing from the summary, one line each.
    #[serde(default)]
    pub holes: Vec<String>,
}

impl ResultSet {
    pub fn empty() -> Self {
        ResultSet {
            schema_version: SCHEMA_VERSION.to_string(),
            metadata: Metadata::current(false),
            plan: None,
            samples: Vec::new(),
            failures: Vec::new(),
            summary: None,
            holes: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.holes.is_empty()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        check_version(&self.schema_version)?;
        for (index, s) in self.samples.iter().enumerate() {
            s.validate().map_err(|reason| HarnessError::InvalidSample { index, reason })?;
        }
        if let Some(summary) = &self.summary {
            summary.validate()?;
        }
        Ok(())
    }

    /// Recomputes the summary and holes from the samples.
    pub fn resummarize(&mut self) {
        let (summary, holes) = summarize(&self.samples, self.plan.as_ref());
        self.summary = summary;
        self.holes = holes;
    }
}

fn check_version(v: &str) -> Result<(), HarnessError> {
    let major = v.split('.').next().and_then(|m| m.parse::<u64>().ok());
    match major {
        Some(SCHEMA_MAJOR) => Ok(()),
        _ => Err(HarnessError::UnsupportedVersion(v.to_string())),
    }
}

/// Aggregates samples into a summary. Missing measurements are reported as
/// holes; without a baseline or a one-core time there is no summary at all.
/// With a plan, its worker counts and one-core policy are used; without one
/// they are inferred from the samples.
pub fn summarize(samples: &[RunSample], plan: Option<&ExperimentPlan>) -> (Option<MeasureSummary>, Vec<String>) {
    let mut holes = Vec::new();
    let adaptive_t1 = match plan {
        Some(plan) => plan.adaptive_t1,
        None => samples.iter().any(|s| s.kind == RunKind::OneCore && s.for_p.is_some_and(|p| p > 1)),
    };
    let mean = |kind: RunKind, select: &dyn Fn(&RunSample) -> bool| -> Option<(f64, f64, usize)> {
        let group: Vec<RunSample> = samples.iter().filter(|s| s.kind == kind && select(s)).cloned().collect();
        if group.is_empty() {
            return None;
        }
        aggregate(&group).ok().map(|a| (a.t_p, a.i_p, a.sample_count))
    };

    let baseline = mean(RunKind::Baseline, &|_| true).map(|m| m.0);
    if baseline.is_none() {
        holes.push("baseline".to_string());
    }
    let elision_time = mean(RunKind::Elision, &|_| true).map(|m| m.0);

    let procs: Vec<usize> = match plan {
        Some(plan) => plan.procs.clone(),
        None => {
            let mut v: Vec<usize> = samples.iter().filter(|s| s.kind == RunKind::Parallel).map(|s| s.p).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    };

    let one_core_time = if adaptive_t1 {
        let mut per = BTreeMap::new();
        for &p in &procs {
            match mean(RunKind::OneCore, &|s| s.for_p == Some(p)) {
                Some(m) => {
                    per.insert(p, m.0);
                }
                None => holes.push(format!("one_core for_p={p}")),
            }
        }
        Some(OneCoreTime::PerP(per))
    } else {
        match mean(RunKind::OneCore, &|s| s.for_p.is_none() || s.for_p == Some(1)) {
            Some(m) => Some(OneCoreTime::Fixed(m.0)),
            None => {
                holes.push("one_core".to_string());
                None
            }
        }
    };

    let mut per_p = BTreeMap::new();
    for &p in &procs {
        let Some((t_p, i_p, n)) = mean(RunKind::Parallel, &|s| s.p == p) else {
            holes.push(format!("parallel p={p}"));
            continue;
        };
        if let Some(OneCoreTime::PerP(per)) = &one_core_time {
            if !per.contains_key(&p) {
                continue;
            }
        }
        per_p.insert(p, PerPMeasure { parallel_time: t_p, idle_time: i_p, sample_count: n });
    }

    let summary = match (baseline, one_core_time) {
        (Some(baseline_time), Some(one_core_time)) => {
            Some(MeasureSummary { baseline_time, one_core_time, elision_time, per_p })
        }
        _ => None,
    };
    (summary, holes)
}

/// Writes `set` as pretty JSON after validating it.
pub fn save_results(set: &ResultSet, path: &Path) -> Result<(), HarnessError> {
    set.validate()?;
    let mut text = serde_json::to_string_pretty(set).expect("result sets serialize");
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Reads and validates a results file.
pub fn load_results(path: &Path) -> Result<ResultSet, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_results(&text).map_err(|e| match e {
        HarnessError::Parse { message, .. } => HarnessError::Parse { path: path.to_path_buf(), message },
        other => other,
    })
}

/// [`load_results`] on in-memory text.
pub fn parse_results(text: &str) -> Result<ResultSet, HarnessError> {
    let parse_err = |message: String| HarnessError::Parse { path: Default::default(), message };
    // Check the version before the shape, so future layouts get a clear error.
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    match raw.get("schema_version").and_then(|v| v.as_str()) {
        Some(v) => check_version(v)?,
        None => return Err(parse_err("missing schema_version".into())),
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    let set: ResultSet =
        serde_path_to_error::deserialize(de).map_err(|e| parse_err(format!("{} (field {})", e.inner(), e.path())))?;
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::speedup_curves;

    fn sample(kind: RunKind, p: usize, wall: f64, idle: f64) -> RunSample {
        RunSample::synthetic("b", kind, p, wall, idle)
    }

    fn full_set() -> Vec<RunSample> {
        vec![
            sample(RunKind::Baseline, 1, 10.0, 0.0),
            sample(RunKind::Elision, 1, 11.0, 0.0),
            sample(RunKind::OneCore, 1, 12.0, 0.0),
            sample(RunKind::Parallel, 1, 12.0, 0.0),
            sample(RunKind::Parallel, 2, 7.0, 1.0),
            sample(RunKind::Parallel, 2, 5.0, 1.0),
        ]
    }

    #[test]
    fn summary_uses_means() {
        let (summary, holes) = summarize(&full_set(), None);
        assert!(holes.is_empty());
        let s = summary.unwrap();
        assert_eq!(s.baseline_time, 10.0);
        assert_eq!(s.elision_time, Some(11.0));
        assert_eq!(s.one_core_time, OneCoreTime::Fixed(12.0));
        assert_eq!(s.per_p[&2], PerPMeasure { parallel_time: 6.0, idle_time: 1.0, sample_count: 2 });
        assert!(speedup_curves(&s).is_ok());
    }

    #[test]
    fn missing_baseline_is_a_hole() {
        let samples: Vec<RunSample> = full_set().into_iter().filter(|s| s.kind != RunKind::Baseline).collect();
        let (summary, holes) = summarize(&samples, None);
        assert!(summary.is_none());
        assert_eq!(holes, ["baseline"]);
    }

    #[test]
    fn adaptive_holes_drop_points() {
        let mut samples = full_set();
        for s in samples.iter_mut().filter(|s| s.kind == RunKind::OneCore) {
            s.for_p = Some(1);
        }
        let plan = ExperimentPlan { adaptive_t1: true, ..ExperimentPlan::new("b", Default::default(), vec![1, 2, 4]) };
        let (summary, holes) = summarize(&samples, Some(&plan));
        assert_eq!(holes, ["one_core for_p=2", "one_core for_p=4", "parallel p=4"]);
        let s = summary.unwrap();
        assert_eq!(s.per_p.keys().copied().collect::<Vec<_>>(), [1]);
    }

    #[test]
    fn version_gate() {
        assert!(check_version("1.0").is_ok());
        assert!(check_version("1.7").is_ok());
        assert!(matches!(check_version("2.0"), Err(HarnessError::UnsupportedVersion(_))));
        assert!(check_version("x").is_err());
    }

    #[test]
    fn parse_reports_field_path() {
        let mut set = ResultSet::empty();
        set.samples = full_set();
        let mut v = serde_json::to_value(&set).unwrap();
        v["samples"][2]["wall_time"] = serde_json::Value::from("slow");
        let err = parse_results(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("samples[2].wall_time"), "{err}");
    }
}
