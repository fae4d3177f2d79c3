use crate::runtime::{Elided, ForkJoin, Parallel};

use super::array_gap::{ArrayBench, ArrayBenchConfig};
use super::cilksort::{digest_u32, SortBench, SortBenchConfig};
use super::{BenchError, Mode, Params};

/// One accepted parameter, for listings.
#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// A benchmark program the harness can instantiate from parameters.
pub trait Benchmark: Send + Sync {
    fn id(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn params(&self) -> &'static [ParamSpec];

    fn has_elision(&self) -> bool {
        true
    }

    /// True when the parallel program's configuration depends on the worker count.
    fn is_adaptive(&self, params: &Params) -> Result<bool, BenchError>;

    fn validate(&self, params: &Params) -> Result<(), BenchError>;

    /// Builds a ready-to-run instance. `for_p` selects worker-count dependent
    /// settings; it need not equal the number of workers that will run it.
    fn prepare(&self, params: &Params, mode: Mode, for_p: usize) -> Result<Box<dyn Instance>, BenchError>;
}

/// A prepared, single-use run. `run` is the timed part; in parallel mode it
/// must be called from inside a runtime launch.
pub trait Instance: Send {
    fn run(&mut self);

    /// Verifies the output and returns a digest identifying it.
    fn finish(self: Box<Self>) -> Result<u64, BenchError>;
}

/// Benchmarks by id.
pub struct Registry {
    benches: Vec<Box<dyn Benchmark>>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry { benches: vec![Box::new(ArrayGap), Box::new(Cilksort), Box::new(Noop)] }
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry { benches: Vec::new() }
    }

    pub fn register(&mut self, bench: Box<dyn Benchmark>) {
        self.benches.retain(|b| b.id() != bench.id());
        self.benches.push(bench);
    }

    pub fn get(&self, id: &str) -> Result<&dyn Benchmark, BenchError> {
        self.benches
            .iter()
            .find(|b| b.id() == id)
            .map(|b| b.as_ref())
            .ok_or_else(|| BenchError::UnknownBenchmark(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Benchmark> {
        self.benches.iter().map(|b| b.as_ref())
    }
}

struct ArrayGap;

struct ArrayInstance {
    bench: ArrayBench,
    mode: Mode,
}

impl Instance for ArrayInstance {
    fn run(&mut self) {
        self.bench.run(self.mode);
    }

    fn finish(self: Box<Self>) -> Result<u64, BenchError> {
        let got = self.bench.checksum();
        let want = self.bench.config().expected_checksum();
        if got != want {
            return Err(BenchError::WrongOutput(format!("checksum {got}, expected {want}")));
        }
        Ok(got)
    }
}

impl Benchmark for ArrayGap {
    fn id(&self) -> &'static str {
        "array_gap"
    }

    fn description(&self) -> &'static str {
        "r passes of l dependent additions over m 64-bit cells visited with stride g"
    }

    fn params(&self) -> &'static [ParamSpec] {
        &[
            ParamSpec { name: "m", default: "(required)", help: "array cells" },
            ParamSpec { name: "l", default: "1", help: "additions per cell" },
            ParamSpec { name: "g", default: "1", help: "gap size, must divide m" },
            ParamSpec { name: "r", default: "1", help: "repetitions" },
            ParamSpec { name: "grain", default: "1000", help: "parallel loop grain" },
            ParamSpec { name: "sweep", default: "false", help: "derive r = ceil(4e8/m)" },
        ]
    }

    fn is_adaptive(&self, _params: &Params) -> Result<bool, BenchError> {
        Ok(false)
    }

    fn validate(&self, params: &Params) -> Result<(), BenchError> {
        ArrayBenchConfig::from_params(params).map(|_| ())
    }

    fn prepare(&self, params: &Params, mode: Mode, _for_p: usize) -> Result<Box<dyn Instance>, BenchError> {
        let cfg = ArrayBenchConfig::from_params(params)?;
        Ok(Box::new(ArrayInstance { bench: ArrayBench::new(cfg)?, mode }))
    }
}

struct Cilksort;

struct SortInstance {
    bench: SortBench,
    mode: Mode,
}

impl Instance for SortInstance {
    fn run(&mut self) {
        self.bench.run(self.mode);
    }

    fn finish(self: Box<Self>) -> Result<u64, BenchError> {
        if !self.bench.is_sorted() {
            return Err(BenchError::WrongOutput("output is not sorted".into()));
        }
        Ok(digest_u32(self.bench.data()))
    }
}

impl Benchmark for Cilksort {
    fn id(&self) -> &'static str {
        "cilksort"
    }

    fn description(&self) -> &'static str {
        "mergesort with parallel merge over seeded random u32 keys, quicksort below the cutoff"
    }

    fn params(&self) -> &'static [ParamSpec] {
        &[
            ParamSpec {
                name: "preset",
                default: "",
                help: "n200k_c200 n200k_c10k n10m_c200 n10m_c1000 n100m_c1000 n10m_c8000_per_p",
            },
            ParamSpec { name: "n", default: "(required without preset)", help: "keys to sort" },
            ParamSpec { name: "cutoff", default: "1000", help: "sequential cutoff, or N/P" },
            ParamSpec { name: "insertion_threshold", default: "20", help: "insertion sort size" },
            ParamSpec { name: "seed", default: "24301", help: "input generator seed" },
        ]
    }

    fn is_adaptive(&self, params: &Params) -> Result<bool, BenchError> {
        Ok(SortBenchConfig::from_params(params)?.cutoff.is_adaptive())
    }

    fn validate(&self, params: &Params) -> Result<(), BenchError> {
        SortBenchConfig::from_params(params).map(|_| ())
    }

    fn prepare(&self, params: &Params, mode: Mode, for_p: usize) -> Result<Box<dyn Instance>, BenchError> {
        let cfg = SortBenchConfig::from_params(params)?;
        Ok(Box::new(SortInstance { bench: SortBench::new(cfg, for_p)?, mode }))
    }
}

/// A balanced tree of empty forks; exercises the scheduler alone.
struct Noop;

struct NoopInstance {
    depth: u32,
    mode: Mode,
    leaves: u64,
}

fn noop_tree<S: ForkJoin>(s: S, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let (a, b) = s.fork2(|| noop_tree(s, depth - 1), || noop_tree(s, depth - 1));
    a + b
}

impl Instance for NoopInstance {
    fn run(&mut self) {
        self.leaves = match self.mode {
            Mode::Baseline => 1u64 << self.depth,
            Mode::Elision => noop_tree(Elided, self.depth),
            Mode::Parallel => noop_tree(Parallel, self.depth),
        };
    }

    fn finish(self: Box<Self>) -> Result<u64, BenchError> {
        let want = 1u64 << self.depth;
        if self.leaves != want {
            return Err(BenchError::WrongOutput(format!("{} leaves, expected {want}", self.leaves)));
        }
        Ok(want)
    }
}

impl Noop {
    fn depth(params: &Params) -> Result<u32, BenchError> {
        params.check_known(&["depth"])?;
        let depth = params.get_u64("depth")?.unwrap_or(10);
        if depth > 30 {
            return Err(BenchError::Config(format!("depth {depth} exceeds 30")));
        }
        Ok(depth as u32)
    }
}

impl Benchmark for Noop {
    fn id(&self) -> &'static str {
        "noop"
    }

    fn description(&self) -> &'static str {
        "balanced binary tree of empty tasks"
    }

    fn params(&self) -> &'static [ParamSpec] {
        &[ParamSpec { name: "depth", default: "10", help: "tree depth, at most 30" }]
    }

    fn is_adaptive(&self, _params: &Params) -> Result<bool, BenchError> {
        Ok(false)
    }

    fn validate(&self, params: &Params) -> Result<(), BenchError> {
        Self::depth(params).map(|_| ())
    }

    fn prepare(&self, params: &Params, mode: Mode, _for_p: usize) -> Result<Box<dyn Instance>, BenchError> {
        Ok(Box::new(NoopInstance { depth: Self::depth(params)?, mode, leaves: 0 }))
    }
}
