//! Fork-join work-stealing runtime whose only instrumentation is per-worker
//! idle-phase timing.
//!
//! A run is started with [`launch`] (or [`Runtime::launch`]) and lasts until the
//! root task returns. Inside a run, [`fork2`] and [`parallel_for`] expose
//! parallelism; each worker owns a LIFO deque and steals from uniformly random
//! victims when it runs dry.

mod clock;
mod job;
mod stats;
mod strategy;
pub mod topology;
mod worker;

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::Ordering;
use std::sync::Mutex;
use std::thread;

use crossbeam_deque::Worker;
use thiserror::Error;

pub use clock::{now, ns_to_secs};
pub use stats::{RunStats, WorkerStats};
pub use strategy::{for_each_leaf, parallel_for, parallel_for_with, CountForks, Elided, ForkJoin, Parallel, TaskRange};
pub use worker::fork2;

use worker::{Shared, WorkerThread};

/// Environment variable overriding the worker count of [`RuntimeConfig::from_env`].
pub const WORKERS_ENV: &str = "FACSPEED_WORKERS";

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("{requested} workers requested but only {available} physical cores are available")]
    TooManyWorkers { requested: usize, available: usize },
    #[error("invalid {WORKERS_ENV} value {0:?}")]
    BadEnv(String),
    #[error("launch called from inside a running task")]
    NestedLaunch,
    #[error("grain must be at least 1")]
    ZeroGrain,
    #[error("range lower bound {lo} exceeds upper bound {hi}")]
    InvertedRange { lo: usize, hi: usize },
    #[error("failed to spawn worker thread: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("task panicked: {message}")]
    TaskPanicked { message: String, stats: Box<RunStats> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub num_workers: usize,
    /// Pin workers to distinct physical cores when possible.
    pub pin_workers: bool,
    /// Permit more workers than physical cores. Timings from such runs are not
    /// meaningful speedup measurements; correctness and accounting still hold.
    pub allow_oversubscription: bool,
}

impl RuntimeConfig {
    pub fn new(num_workers: usize) -> Self {
        RuntimeConfig { num_workers, pin_workers: true, allow_oversubscription: false }
    }

    /// Uses `FACSPEED_WORKERS` when set, `default_workers` otherwise.
    pub fn from_env(default_workers: usize) -> Result<Self, RuntimeError> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => {
                let n = v.trim().parse::<usize>().map_err(|_| RuntimeError::BadEnv(v.clone()))?;
                Ok(Self::new(n))
            }
            Err(_) => Ok(Self::new(default_workers)),
        }
    }

    pub fn oversubscribe(mut self, allow: bool) -> Self {
        self.allow_oversubscription = allow;
        self
    }

    pub fn pin(mut self, pin: bool) -> Self {
        self.pin_workers = pin;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Runtime {
    config: RuntimeConfig,
    cores: usize,
}

/// Serializes runs: the runtime executes one run at a time per process.
static LAUNCH_LOCK: Mutex<()> = Mutex::new(());

impl Runtime {
    pub fn new(num_workers: usize) -> Result<Self, RuntimeError> {
        Self::with_config(RuntimeConfig::new(num_workers))
    }

    pub fn with_config(config: RuntimeConfig) -> Result<Self, RuntimeError> {
        if config.num_workers == 0 {
            return Err(RuntimeError::ZeroWorkers);
        }
        let cores = topology::physical_cores();
        if config.num_workers > cores && !config.allow_oversubscription {
            return Err(RuntimeError::TooManyWorkers { requested: config.num_workers, available: cores });
        }
        Ok(Runtime { config, cores })
    }

    pub fn num_workers(&self) -> usize {
        self.config.num_workers
    }

    /// Runs `root` to completion on a fresh set of workers with idle-time accounting.
    pub fn launch<R, F>(&self, root: F) -> Result<(R, RunStats), RuntimeError>
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        self.run::<true, R, F>(root)
    }

    /// Same as [`launch`](Self::launch) with the idle-phase clock reads compiled
    /// out. Idle totals and phase counts are reported as zero.
    pub fn launch_uninstrumented<R, F>(&self, root: F) -> Result<(R, RunStats), RuntimeError>
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        self.run::<false, R, F>(root)
    }

    fn run<const INSTRUMENT: bool, R, F>(&self, root: F) -> Result<(R, RunStats), RuntimeError>
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        if !WorkerThread::current().is_null() {
            return Err(RuntimeError::NestedLaunch);
        }
        let _guard = LAUNCH_LOCK.lock().unwrap_or_else(|e| e.into_inner());

        let p = self.config.num_workers;
        let oversubscribed = p > self.cores;
        let targets = if self.config.pin_workers && !oversubscribed { topology::pin_targets() } else { Vec::new() };
        if self.config.pin_workers && targets.len() < p {
            log::warn!("running {p} workers unpinned ({} pinnable cores)", targets.len());
        }

        let deques: Vec<Worker<job::JobRef>> = (0..p).map(|_| Worker::new_lifo()).collect();
        let shared = Shared::new(deques.iter().map(Worker::stealer).collect(), oversubscribed);

        let (outcome, per_worker) = thread::scope(|s| -> Result<_, RuntimeError> {
            let mut handles = Vec::with_capacity(p - 1);
            let mut deques = deques.into_iter();
            let root_deque = deques.next().expect("at least one worker");

            for (index, deque) in deques.enumerate().map(|(i, d)| (i + 1, d)) {
                let shared = &shared;
                let cpu = targets.get(index).copied();
                let spawned =
                    thread::Builder::new().name(format!("facspeed-worker-{index}")).spawn_scoped(s, move || {
                        if let Some(cpu) = cpu {
                            topology::pin_current_thread(cpu);
                        }
                        let wt = WorkerThread::new::<INSTRUMENT>(index, deque, shared);
                        shared.arrived.fetch_add(1, Ordering::AcqRel);
                        wt.enter(|| wt.main_loop::<INSTRUMENT>());
                        wt.stats()
                    });
                match spawned {
                    Ok(h) => handles.push(h),
                    Err(e) => {
                        shared.done.store(true, Ordering::Release);
                        return Err(e.into());
                    }
                }
            }

            let shared = &shared;
            let cpu = targets.first().copied();
            let spawned = thread::Builder::new().name("facspeed-worker-0".into()).spawn_scoped(s, move || {
                if let Some(cpu) = cpu {
                    topology::pin_current_thread(cpu);
                }
                let wt = WorkerThread::new::<INSTRUMENT>(0, root_deque, shared);
                while shared.arrived.load(Ordering::Acquire) < p - 1 {
                    thread::yield_now();
                }
                let start = now();
                shared.run_start.store(start, Ordering::Relaxed);
                shared.started.store(true, Ordering::Release);
                let result = wt.enter(|| panic::catch_unwind(AssertUnwindSafe(root)));
                let end = now();
                shared.run_end.store(end, Ordering::Relaxed);
                shared.done.store(true, Ordering::Release);
                (result, end - start, wt.stats())
            });
            let root_handle = match spawned {
                Ok(h) => h,
                Err(e) => {
                    shared.done.store(true, Ordering::Release);
                    return Err(e.into());
                }
            };

            let (result, wall, root_stats) = root_handle.join().unwrap_or_else(|p| panic::resume_unwind(p));
            let mut per_worker = vec![root_stats];
            for h in handles {
                per_worker.push(h.join().unwrap_or_else(|p| panic::resume_unwind(p)));
            }
            Ok(((result, wall), per_worker))
        })?;

        let (result, wall) = outcome;
        let stats = RunStats::from_workers(wall, per_worker, INSTRUMENT);
        match result {
            Ok(r) => Ok((r, stats)),
            Err(payload) => {
                Err(RuntimeError::TaskPanicked { message: panic_message(&*payload), stats: Box::new(stats) })
            }
        }
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Runs `root` on `num_workers` workers and returns its result with the run's statistics.
pub fn launch<R, F>(num_workers: usize, root: F) -> Result<(R, RunStats), RuntimeError>
where
    F: FnOnce() -> R + Send,
    R: Send,
{
    Runtime::new(num_workers)?.launch(root)
}
