//! Runs experiment plans and persists their samples.
//!
//! A plan expands into cells (baseline, elision, one-core, then each P in
//! ascending order); each cell gets its warmup runs and then `reps` retained
//! samples. With isolation on, every run happens in a fresh child process
//! started as `facspeed run-one`, which prints one JSON sample on stdout.

mod plan;
mod results;
mod sample;

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::benchmarks::{BenchError, Params, Registry};
use crate::measures::MeasureError;
use crate::runtime::{now, Runtime, RuntimeConfig, RuntimeError};

pub use plan::{ExperimentPlan, PlanCell};
pub use results::{load_results, parse_results, save_results, summarize, Failure, Metadata, ResultSet, SCHEMA_VERSION};
pub use sample::{HostInfo, RunKind, RunSample};

/// Overrides the executable used for isolated runs.
pub const EXE_ENV: &str = "FACSPEED_EXE";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("unsupported schema version {0:?}")]
    UnsupportedVersion(String),
    #[error("sample {index} violates an invariant: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("child run failed ({status}): {stderr}")]
    Child { status: String, stderr: String },
    #[error("run panicked: {0}")]
    Panicked(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    /// Errors caused by the plan or benchmark configuration rather than by a run.
    pub fn is_config_error(&self) -> bool {
        match self {
            HarnessError::Plan(_) => true,
            HarnessError::Bench(e) => !matches!(e, BenchError::Alloc { .. } | BenchError::WrongOutput(_)),
            HarnessError::Runtime(e) => {
                matches!(e, RuntimeError::ZeroWorkers | RuntimeError::TooManyWorkers { .. } | RuntimeError::BadEnv(_))
            }
            _ => false,
        }
    }
}

/// How a single run is executed.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Run in a fresh child process.
    pub isolate: bool,
    pub oversubscribe: bool,
    /// Keep idle-time accounting compiled in.
    pub instrument: bool,
    /// Executable for isolated runs; defaults to `FACSPEED_EXE` or the current executable.
    pub exe: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { isolate: true, oversubscribe: false, instrument: true, exe: None }
    }
}

impl RunOptions {
    pub fn in_process() -> Self {
        RunOptions { isolate: false, ..Self::default() }
    }

    fn exe(&self) -> Result<PathBuf, HarnessError> {
        if let Some(exe) = &self.exe {
            return Ok(exe.clone());
        }
        if let Some(exe) = std::env::var_os(EXE_ENV) {
            return Ok(PathBuf::from(exe));
        }
        std::env::current_exe().map_err(|e| HarnessError::io(Path::new("current executable"), e))
    }
}

/// Takes one sample of `cell`.
pub fn run_single(
    registry: &Registry,
    benchmark_id: &str,
    params: &Params,
    cell: PlanCell,
    opts: &RunOptions,
) -> Result<RunSample, HarnessError> {
    let sample = if opts.isolate {
        run_child(benchmark_id, params, cell, opts)?
    } else {
        let caught =
            panic::catch_unwind(AssertUnwindSafe(|| run_in_process(registry, benchmark_id, params, cell, opts)));
        caught.map_err(|p| HarnessError::Panicked(panic_message(p.as_ref())))??
    };
    if sample.kind != cell.kind || sample.p != cell.p || sample.for_p != cell.for_p {
        return Err(HarnessError::Child {
            status: "mismatch".into(),
            stderr: format!("asked for {cell}, got {} p={}", sample.kind, sample.p),
        });
    }
    Ok(sample)
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".into())
}

/// Takes one sample in the calling process. Preparation (input generation,
/// allocation) is not timed; output verification happens after timing.
pub fn run_in_process(
    registry: &Registry,
    benchmark_id: &str,
    params: &Params,
    cell: PlanCell,
    opts: &RunOptions,
) -> Result<RunSample, HarnessError> {
    let bench = registry.get(benchmark_id)?;
    let for_p = cell.for_p.unwrap_or(cell.p);
    let mut inst = bench.prepare(params, cell.kind.mode(), for_p)?;
    let mut sample = if cell.kind.uses_runtime() {
        let rt = Runtime::with_config(RuntimeConfig::new(cell.p).oversubscribe(opts.oversubscribe))?;
        let ((), stats) =
            if opts.instrument { rt.launch(|| inst.run())? } else { rt.launch_uninstrumented(|| inst.run())? };
        RunSample::from_run_stats(benchmark_id, params, cell.kind, &stats)
    } else {
        let start = now();
        inst.run();
        let end = now();
        RunSample::sequential(benchmark_id, params, cell.kind, end.saturating_sub(start).max(1))
    };
    sample.for_p = cell.for_p;
    sample.output_digest = Some(inst.finish()?);
    sample.validate().map_err(|reason| HarnessError::InvalidSample { index: 0, reason })?;
    Ok(sample)
}

/// Arguments of the `run-one` command for `cell`.
pub fn run_one_args(benchmark_id: &str, params: &Params, cell: PlanCell, opts: &RunOptions) -> Vec<String> {
    let mut args = vec![
        "run-one".to_string(),
        "--bench".to_string(),
        benchmark_id.to_string(),
        "--kind".to_string(),
        cell.kind.as_str().to_string(),
        "--procs".to_string(),
        cell.p.to_string(),
        "--params-json".to_string(),
        serde_json::to_string(params).expect("params serialize"),
    ];
    if let Some(fp) = cell.for_p {
        args.extend(["--for-p".to_string(), fp.to_string()]);
    }
    if opts.oversubscribe {
        args.push("--oversubscribe".to_string());
    }
    if !opts.instrument {
        args.push("--no-instrument".to_string());
    }
    args
}

fn run_child(
    benchmark_id: &str,
    params: &Params,
    cell: PlanCell,
    opts: &RunOptions,
) -> Result<RunSample, HarnessError> {
    let exe = opts.exe()?;
    let out = Command::new(&exe)
        .args(run_one_args(benchmark_id, params, cell, opts))
        .output()
        .map_err(|e| HarnessError::io(&exe, e))?;
    let stderr = String::from_utf8_lossy(&out.stderr).trim().to_string();
    if !out.status.success() {
        return Err(HarnessError::Child { status: out.status.to_string(), stderr });
    }
    let de = &mut serde_json::Deserializer::from_slice(&out.stdout);
    let sample: RunSample = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Child {
        status: "unparseable output".into(),
        stderr: format!("{} (field {}); stderr: {stderr}", e.inner(), e.path()),
    })?;
    sample.validate().map_err(|reason| HarnessError::InvalidSample { index: 0, reason })?;
    Ok(sample)
}

/// Runs every cell of `plan` and returns the samples with their summary.
/// Failed runs are recorded and the plan continues. The result is written to
/// `plan.output_path` when set.
pub fn run_experiment(
    plan: &ExperimentPlan,
    registry: &Registry,
    exe: Option<PathBuf>,
) -> Result<ResultSet, HarnessError> {
    plan.validate(registry)?;
    let bench = registry.get(&plan.benchmark_id)?;
    let opts = RunOptions { isolate: plan.isolate, oversubscribe: plan.oversubscribe, instrument: true, exe };
    let mut set =
        ResultSet { metadata: Metadata::current(plan.isolate), plan: Some(plan.clone()), ..ResultSet::empty() };
    let cells = plan.cells(bench.has_elision());
    let warmup = |cell: PlanCell| {
        for _ in 0..plan.warmup_runs {
            if let Err(e) = run_single(registry, &plan.benchmark_id, &plan.params, cell, &opts) {
                log::warn!("warmup of {cell} failed: {e}");
            }
        }
    };
    let mut measure =
        |cell: PlanCell, rep: usize| match run_single(registry, &plan.benchmark_id, &plan.params, cell, &opts) {
            Ok(s) => set.samples.push(s),
            Err(e) => {
                log::error!("{cell} rep {rep} failed: {e}");
                set.failures.push(Failure {
                    kind: cell.kind,
                    p: cell.p,
                    for_p: cell.for_p,
                    rep,
                    message: e.to_string(),
                });
            }
        };
    if plan.interleave {
        cells.iter().for_each(|&c| warmup(c));
        for rep in 0..plan.reps {
            log::info!("{}: round {rep}", plan.benchmark_id);
            let round: Box<dyn Iterator<Item = &PlanCell>> =
                if rep % 2 == 0 { Box::new(cells.iter()) } else { Box::new(cells.iter().rev()) };
            for &cell in round {
                measure(cell, rep);
            }
        }
    } else {
        for &cell in &cells {
            log::info!("{}: {cell}", plan.benchmark_id);
            warmup(cell);
            for rep in 0..plan.reps {
                measure(cell, rep);
            }
        }
    }
    set.resummarize();
    if let Some(path) = &plan.output_path {
        save_results(&set, path)?;
    }
    Ok(set)
}
