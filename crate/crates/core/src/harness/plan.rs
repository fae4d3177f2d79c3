use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::{Params, Registry};
use crate::runtime::topology;

use super::{HarnessError, RunKind};

/// What to measure and how often. Plan files are JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub benchmark_id: String,
    #[serde(default)]
    pub params: Params,
    pub procs: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_warmups")]
    pub warmup_runs: usize,
    /// Measure a one-core time per P with that P's settings.
    #[serde(default)]
    pub adaptive_t1: bool,
    /// Run every sample in a fresh child process.
    #[serde(default = "default_true")]
    pub isolate: bool,
    /// Permit more workers than physical cores.
    #[serde(default)]
    pub oversubscribe: bool,
    /// Cycle through all cells once per repetition, alternating direction,
    /// instead of finishing each cell before the next.
    #[serde(default)]
    pub interleave: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_reps() -> usize {
    5
}

fn default_warmups() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One configuration of a plan, run `reps` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanCell {
    pub kind: RunKind,
    pub p: usize,
    pub for_p: Option<usize>,
}

impl std::fmt::Display for PlanCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} p={}", self.kind, self.p)?;
        if let Some(fp) = self.for_p {
            write!(f, " for_p={fp}")?;
        }
        Ok(())
    }
}

impl ExperimentPlan {
    pub fn new(benchmark_id: &str, params: Params, procs: Vec<usize>) -> Self {
        ExperimentPlan {
            benchmark_id: benchmark_id.to_string(),
            params,
            procs,
            reps: default_reps(),
            warmup_runs: default_warmups(),
            adaptive_t1: false,
            isolate: true,
            oversubscribe: false,
            interleave: false,
            output_path: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            message: format!("{} at {}", e.inner(), e.path()),
        })
    }

    /// Checks the plan against the registry and the machine.
    pub fn validate(&self, registry: &Registry) -> Result<(), HarnessError> {
        let bench = registry.get(&self.benchmark_id)?;
        bench.validate(&self.params)?;
        if self.procs.is_empty() {
            return Err(HarnessError::Plan("procs must not be empty".into()));
        }
        if self.procs[0] == 0 {
            return Err(HarnessError::Plan("worker counts must be at least 1".into()));
        }
        if self.procs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Plan("procs must be strictly increasing".into()));
        }
        if self.reps == 0 {
            return Err(HarnessError::Plan("reps must be at least 1".into()));
        }
        let cores = topology::physical_cores();
        let max = *self.procs.last().unwrap();
        if max > cores && !self.oversubscribe {
            return Err(HarnessError::Plan(format!(
                "P = {max} exceeds the {cores} physical cores available (set oversubscribe to allow)"
            )));
        }
        if self.adaptive_t1 && !bench.is_adaptive(&self.params)? {
            log::warn!("adaptive_t1 set but {} settings do not depend on P", self.benchmark_id);
        }
        if !self.adaptive_t1 && bench.is_adaptive(&self.params)? {
            log::warn!("settings depend on P but adaptive_t1 is off; T_1 uses the P = 1 settings");
        }
        Ok(())
    }

    /// Cells in execution order: baseline, elision, one-core, ascending P.
    pub fn cells(&self, has_elision: bool) -> Vec<PlanCell> {
        let mut cells = vec![PlanCell { kind: RunKind::Baseline, p: 1, for_p: None }];
        if has_elision {
            cells.push(PlanCell { kind: RunKind::Elision, p: 1, for_p: None });
        }
        if self.adaptive_t1 {
            cells.extend(self.procs.iter().map(|&p| PlanCell { kind: RunKind::OneCore, p: 1, for_p: Some(p) }));
        } else {
            cells.push(PlanCell { kind: RunKind::OneCore, p: 1, for_p: None });
        }
        cells.extend(self.procs.iter().map(|&p| PlanCell { kind: RunKind::Parallel, p, for_p: None }));
        cells
    }
}
