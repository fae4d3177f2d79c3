use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::benchmarks::{Mode, Params};
use crate::runtime::{ns_to_secs, topology, RunStats};

/// Which of the four measured quantities a run contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    /// Sequential baseline, `T_s`.
    Baseline,
    /// Sequential elision, `T_elision`.
    Elision,
    /// Parallel program on one worker, `T_1`.
    OneCore,
    /// Parallel program on `p` workers, `T_P` and `I_P`.
    Parallel,
}

impl RunKind {
    pub const ALL: [RunKind; 4] = [RunKind::Baseline, RunKind::Elision, RunKind::OneCore, RunKind::Parallel];

    pub fn mode(self) -> Mode {
        match self {
            RunKind::Baseline => Mode::Baseline,
            RunKind::Elision => Mode::Elision,
            RunKind::OneCore | RunKind::Parallel => Mode::Parallel,
        }
    }

    /// Whether the run goes through the scheduler.
    pub fn uses_runtime(self) -> bool {
        matches!(self, RunKind::OneCore | RunKind::Parallel)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunKind::Baseline => "baseline",
            RunKind::Elision => "elision",
            RunKind::OneCore => "one_core",
            RunKind::Parallel => "parallel",
        }
    }

    pub fn parse(s: &str) -> Option<RunKind> {
        RunKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for RunKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Machine a sample was taken on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub physical_cores: usize,
}

impl HostInfo {
    pub fn current() -> Self {
        HostInfo {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: num_cpus::get(),
            physical_cores: topology::physical_cores(),
        }
    }
}

/// One timed run. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub benchmark_id: String,
    pub params: Params,
    pub kind: RunKind,
    pub p: usize,
    /// Worker count the benchmark's settings were resolved for, when it differs
    /// from `p` (one-core runs of worker-count dependent configurations).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub for_p: Option<usize>,
    pub wall_time: f64,
    pub idle_time: f64,
    pub per_worker_idle: Vec<f64>,
    pub steals: u64,
    pub idle_phases: u64,
    /// False when idle-time accounting was compiled out for this run.
    #[serde(default = "default_true")]
    pub instrumented: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_digest: Option<u64>,
    pub host: HostInfo,
    pub timestamp: DateTime<Utc>,
}

fn default_true() -> bool {
    true
}

/// Absolute slack for sums of nanosecond-derived seconds.
const SUM_SLACK: f64 = 1e-9;

impl RunSample {
    /// A sample with the given timings and no scheduler detail, for tests and
    /// hand-built data sets.
    pub fn synthetic(benchmark_id: &str, kind: RunKind, p: usize, wall_time: f64, idle_time: f64) -> Self {
        let per_worker_idle = if kind.uses_runtime() { vec![idle_time / p.max(1) as f64; p] } else { Vec::new() };
        RunSample {
            benchmark_id: benchmark_id.to_string(),
            params: Params::new(),
            kind,
            p,
            for_p: None,
            wall_time,
            idle_time,
            per_worker_idle,
            steals: 0,
            idle_phases: 0,
            instrumented: true,
            output_digest: None,
            host: HostInfo::current(),
            timestamp: Utc::now(),
        }
    }

    /// A sample from a runtime launch.
    pub fn from_run_stats(benchmark_id: &str, params: &Params, kind: RunKind, stats: &RunStats) -> Self {
        RunSample {
            benchmark_id: benchmark_id.to_string(),
            params: params.clone(),
            kind,
            p: stats.num_workers,
            for_p: None,
            wall_time: stats.wall_secs(),
            idle_time: stats.idle_secs(),
            per_worker_idle: stats.per_worker.iter().map(|w| ns_to_secs(w.idle_total)).collect(),
            steals: stats.total_steals,
            idle_phases: stats.total_idle_phases,
            instrumented: stats.instrumented,
            output_digest: None,
            host: HostInfo::current(),
            timestamp: Utc::now(),
        }
    }

    /// A sequential sample timed outside the runtime.
    pub fn sequential(benchmark_id: &str, params: &Params, kind: RunKind, wall_ns: u64) -> Self {
        RunSample {
            benchmark_id: benchmark_id.to_string(),
            params: params.clone(),
            kind,
            p: 1,
            for_p: None,
            wall_time: ns_to_secs(wall_ns),
            idle_time: 0.0,
            per_worker_idle: Vec::new(),
            steals: 0,
            idle_phases: 0,
            instrumented: true,
            output_digest: None,
            host: HostInfo::current(),
            timestamp: Utc::now(),
        }
    }

    /// Checks the kind/worker-count consistency rules and the idle bounds.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.wall_time.is_finite() && self.wall_time > 0.0) {
            return Err(format!("wall_time must be positive, got {}", self.wall_time));
        }
        if !(self.idle_time.is_finite() && self.idle_time >= 0.0) {
            return Err(format!("idle_time must be non-negative, got {}", self.idle_time));
        }
        if self.p == 0 {
            return Err("p must be at least 1".into());
        }
        match self.kind {
            RunKind::Baseline | RunKind::Elision => {
                if self.p != 1 {
                    return Err(format!("{} run must have p = 1, got {}", self.kind, self.p));
                }
                if self.idle_time != 0.0 || self.steals != 0 || self.per_worker_idle.iter().any(|&x| x != 0.0) {
                    return Err(format!("{} run must have no idle time or steals", self.kind));
                }
            }
            RunKind::OneCore => {
                if self.p != 1 {
                    return Err(format!("one_core run must have p = 1, got {}", self.p));
                }
                // A single worker never waits; allow clock granularity only.
                if self.idle_time > 1e-6_f64.max(0.01 * self.wall_time) {
                    return Err(format!("one_core run has idle time {}", self.idle_time));
                }
            }
            RunKind::Parallel => {}
        }
        let capacity = self.p as f64 * self.wall_time;
        if self.idle_time > capacity * (1.0 + 1e-12) + SUM_SLACK {
            return Err(format!("idle_time {} exceeds p * wall_time = {capacity}", self.idle_time));
        }
        if self.kind.uses_runtime() && self.instrumented {
            if self.per_worker_idle.len() != self.p {
                return Err(format!("{} per-worker idle entries for p = {}", self.per_worker_idle.len(), self.p));
            }
            if let Some(w) = self.per_worker_idle.iter().find(|&&w| !(w >= 0.0 && w <= self.wall_time + SUM_SLACK)) {
                return Err(format!("per-worker idle {w} outside [0, wall_time]"));
            }
            let sum: f64 = self.per_worker_idle.iter().sum();
            if (sum - self.idle_time).abs() > SUM_SLACK + 1e-12 * self.idle_time {
                return Err(format!("per-worker idle sums to {sum}, idle_time is {}", self.idle_time));
            }
        }
        Ok(())
    }
}
