//! Benchmark programs, each runnable as a sequential baseline, a sequential
//! elision of the parallel code, or the parallel code itself.

pub mod array_gap;
pub mod cilksort;
mod params;
mod registry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use array_gap::{checked_gap_index, gap_index, ArrayBench, ArrayBenchConfig};
pub use cilksort::{cilksort, parallel_merge, quicksort, sequential_merge, Cutoff, SortBench, SortBenchConfig};
pub use params::Params;
pub use registry::{Benchmark, Instance, ParamSpec, Registry};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark {0:?}")]
    UnknownBenchmark(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("missing required parameter {0:?}")]
    MissingParam(&'static str),
    #[error("invalid parameter {key:?}: {reason}")]
    InvalidParam { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot allocate {bytes} bytes")]
    Alloc { bytes: u64 },
    #[error("benchmark {kind} has no sequential elision")]
    NoElision { kind: &'static str },
    #[error("output check failed: {0}")]
    WrongOutput(String),
}

/// Which variant of a benchmark program to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Best sequential program, no fork-join structure.
    Baseline,
    /// Parallel program with every fork replaced by a sequence.
    Elision,
    /// Parallel program on the runtime.
    Parallel,
}
