//! Mergesort with a parallel merge, falling back to quicksort below a cutoff.
//!
//! Sorting ping-pongs between the input and one scratch buffer of equal size.
//! The same cutoff bounds both the sort recursion and the merge recursion.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::runtime::{Elided, ForkJoin, Parallel};

use super::{BenchError, Mode, Params};

pub const DEFAULT_INSERTION_THRESHOLD: usize = 20;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Size at or below which a subproblem runs sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    Fixed(usize),
    /// `numerator / P`, rounded to nearest.
    PerProc(usize),
}

impl Cutoff {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Cutoff::PerProc(_))
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Fixed(c) => write!(f, "{c}"),
            Cutoff::PerProc(n) => write!(f, "{n}/P"),
        }
    }
}

impl FromStr for Cutoff {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::InvalidParam { key: "cutoff".into(), reason: format!("cannot parse {s:?}") };
        let s = s.trim();
        match s.split_once('/') {
            Some((num, den)) if den.trim().eq_ignore_ascii_case("p") => {
                let n = num.trim().parse::<usize>().map_err(|_| bad())?;
                Ok(Cutoff::PerProc(n))
            }
            Some(_) => Err(bad()),
            None => s.parse::<usize>().map(Cutoff::Fixed).map_err(|_| bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortBenchConfig {
    pub n: usize,
    pub cutoff: Cutoff,
    pub insertion_threshold: usize,
    pub seed: u64,
}

/// Named configurations: (name, n, cutoff).
pub const PRESETS: &[(&str, usize, Cutoff)] = &[
    ("n200k_c200", 200_000, Cutoff::Fixed(200)),
    ("n200k_c10k", 200_000, Cutoff::Fixed(10_000)),
    ("n10m_c200", 10_000_000, Cutoff::Fixed(200)),
    ("n10m_c1000", 10_000_000, Cutoff::Fixed(1000)),
    ("n100m_c1000", 100_000_000, Cutoff::Fixed(1000)),
    ("n10m_c8000_per_p", 10_000_000, Cutoff::PerProc(8000)),
];

impl SortBenchConfig {
    pub const PARAM_NAMES: &'static [&'static str] = &["preset", "n", "cutoff", "insertion_threshold", "seed"];

    pub fn new(n: usize, cutoff: Cutoff) -> Self {
        SortBenchConfig { n, cutoff, insertion_threshold: DEFAULT_INSERTION_THRESHOLD, seed: DEFAULT_SEED }
    }

    pub fn preset(name: &str) -> Result<Self, BenchError> {
        PRESETS.iter().find(|(p, ..)| *p == name).map(|&(_, n, c)| Self::new(n, c)).ok_or_else(|| {
            BenchError::InvalidParam { key: "preset".into(), reason: format!("unknown preset {name:?}") }
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n == 0 {
            return Err(BenchError::Config("n must be at least 1".into()));
        }
        if self.insertion_threshold == 0 {
            return Err(BenchError::Config("insertion_threshold must be at least 1".into()));
        }
        match self.cutoff {
            Cutoff::Fixed(c) if c < self.insertion_threshold => Err(BenchError::Config(format!(
                "cutoff {c} is below the insertion threshold {}",
                self.insertion_threshold
            ))),
            Cutoff::PerProc(0) => Err(BenchError::Config("adaptive cutoff numerator must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Cutoff in effect for a `p`-worker run.
    pub fn resolve_cutoff(&self, p: usize) -> usize {
        match self.cutoff {
            Cutoff::Fixed(c) => c,
            Cutoff::PerProc(num) => {
                let p = p.max(1);
                ((num + p / 2) / p).max(self.insertion_threshold)
            }
        }
    }

    /// Reads a configuration, starting from `preset` when given and letting
    /// explicit keys override it.
    pub fn from_params(p: &Params) -> Result<Self, BenchError> {
        p.check_known(Self::PARAM_NAMES)?;
        let mut cfg = match p.get_str("preset") {
            Some(name) => Self::preset(&name)?,
            None => {
                let n = p.get_usize("n")?.ok_or(BenchError::MissingParam("n"))?;
                Self::new(n, Cutoff::Fixed(1000))
            }
        };
        if let Some(n) = p.get_usize("n")? {
            cfg.n = n;
        }
        if let Some(c) = p.get("cutoff") {
            cfg.cutoff = match c {
                serde_json::Value::String(s) => s.parse()?,
                _ => Cutoff::Fixed(p.get_usize("cutoff")?.unwrap_or_default()),
            };
        }
        if let Some(t) = p.get_usize("insertion_threshold")? {
            cfg.insertion_threshold = t;
        }
        if let Some(s) = p.get_u64("seed")? {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_params(&self) -> Params {
        let cutoff = match self.cutoff {
            Cutoff::Fixed(c) => serde_json::Value::from(c as u64),
            adaptive => serde_json::Value::from(adaptive.to_string()),
        };
        Params::new()
            .with("n", self.n as u64)
            .with("cutoff", cutoff)
            .with("insertion_threshold", self.insertion_threshold as u64)
            .with("seed", self.seed)
    }
}

/// Uniform 32-bit keys from a seeded generator.
pub fn generate_input(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

pub fn insertion_sort<T: Ord + Copy>(v: &mut [T]) {
    for i in 1..v.len() {
        let x = v[i];
        let mut j = i;
        while j > 0 && v[j - 1] > x {
            v[j] = v[j - 1];
            j -= 1;
        }
        v[j] = x;
    }
}

/// Median-of-three quicksort, insertion sort at or below `threshold`.
pub fn quicksort<T: Ord + Copy>(mut v: &mut [T], threshold: usize) {
    // Partitioning needs at least three elements.
    let threshold = threshold.max(2);
    while v.len() > threshold {
        let p = partition(v);
        // Recurse on the smaller side to bound stack depth.
        let (lo, hi) = v.split_at_mut(p);
        let hi = &mut hi[1..];
        if lo.len() < hi.len() {
            quicksort(lo, threshold);
            v = hi;
        } else {
            quicksort(hi, threshold);
            v = lo;
        }
    }
    insertion_sort(v);
}

/// Places a median-of-three pivot at its final position and returns it.
fn partition<T: Ord + Copy>(v: &mut [T]) -> usize {
    let last = v.len() - 1;
    let mid = last / 2;
    if v[mid] < v[0] {
        v.swap(mid, 0);
    }
    if v[last] < v[0] {
        v.swap(last, 0);
    }
    if v[last] < v[mid] {
        v.swap(last, mid);
    }
    // v[0] <= v[mid] <= v[last]; park the pivot next to the end.
    v.swap(mid, last - 1);
    let pivot = v[last - 1];
    let (mut i, mut j) = (0usize, last - 1);
    loop {
        i += 1;
        while v[i] < pivot {
            i += 1;
        }
        j -= 1;
        while pivot < v[j] {
            j -= 1;
        }
        if i >= j {
            break;
        }
        v.swap(i, j);
    }
    v.swap(i, last - 1);
    i
}

/// Stable merge: on ties, elements of `a` come first.
pub fn sequential_merge<T: Ord + Copy>(a: &[T], b: &[T], out: &mut [T]) {
    debug_assert_eq!(a.len() + b.len(), out.len());
    let (mut i, mut j) = (0, 0);
    for slot in out.iter_mut() {
        if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            *slot = a[i];
            i += 1;
        } else {
            *slot = b[j];
            j += 1;
        }
    }
}

/// Stable merge of two sorted runs into `out`, forking above `cutoff`.
pub fn parallel_merge<S, T>(s: S, a: &[T], b: &[T], out: &mut [T], cutoff: usize)
where
    S: ForkJoin,
    T: Ord + Copy + Send + Sync,
{
    assert_eq!(a.len() + b.len(), out.len(), "output length must equal the input lengths");
    // Two single elements cannot be split further.
    if a.len() + b.len() <= cutoff.max(2) || a.is_empty() || b.is_empty() {
        sequential_merge(a, b, out);
        return;
    }
    // Split at the median of the larger run. Ties between the runs must keep
    // a's copies left of b's, hence lower bound in b and upper bound in a.
    let (ia, ib) = if a.len() >= b.len() {
        let ia = a.len() / 2;
        (ia, b.partition_point(|x| *x < a[ia]))
    } else {
        let ib = b.len() / 2;
        (a.partition_point(|x| *x <= b[ib]), ib)
    };
    let (a_lo, a_hi) = a.split_at(ia);
    let (b_lo, b_hi) = b.split_at(ib);
    let (out_lo, out_hi) = out.split_at_mut(ia + ib);
    s.fork2(|| parallel_merge(s, a_lo, b_lo, out_lo, cutoff), || parallel_merge(s, a_hi, b_hi, out_hi, cutoff));
}

/// Sorts `v` using `buf` (same length) as scratch.
pub fn cilksort<S, T>(s: S, v: &mut [T], buf: &mut [T], cutoff: usize, insertion_threshold: usize)
where
    S: ForkJoin,
    T: Ord + Copy + Send + Sync,
{
    assert_eq!(v.len(), buf.len(), "scratch buffer must match the input length");
    sort_into(s, v, buf, false, cutoff.max(1), insertion_threshold);
}

/// Sorts `v`; the result ends in `buf` when `into_buf`, else in `v`.
fn sort_into<S, T>(s: S, v: &mut [T], buf: &mut [T], into_buf: bool, cutoff: usize, ins: usize)
where
    S: ForkJoin,
    T: Ord + Copy + Send + Sync,
{
    if v.len() <= cutoff {
        quicksort(v, ins);
        if into_buf {
            buf.copy_from_slice(v);
        }
        return;
    }
    let mid = v.len() / 2;
    {
        let (v_lo, v_hi) = v.split_at_mut(mid);
        let (b_lo, b_hi) = buf.split_at_mut(mid);
        s.fork2(
            || sort_into(s, v_lo, b_lo, !into_buf, cutoff, ins),
            || sort_into(s, v_hi, b_hi, !into_buf, cutoff, ins),
        );
    }
    if into_buf {
        let (lo, hi) = v.split_at(mid);
        parallel_merge(s, lo, hi, buf, cutoff);
    } else {
        let (lo, hi) = buf.split_at(mid);
        parallel_merge(s, lo, hi, v, cutoff);
    }
}

/// Generated input plus scratch space, ready to be sorted once.
pub struct SortBench {
    cfg: SortBenchConfig,
    cutoff: usize,
    data: Vec<u32>,
    buf: Vec<u32>,
}

impl SortBench {
    /// Prepares a run whose adaptive cutoff is resolved for `for_p` workers.
    pub fn new(cfg: SortBenchConfig, for_p: usize) -> Result<Self, BenchError> {
        cfg.validate()?;
        let data = generate_input(cfg.n, cfg.seed);
        let mut buf = Vec::new();
        buf.try_reserve_exact(cfg.n).map_err(|_| BenchError::Alloc { bytes: cfg.n as u64 * 4 })?;
        buf.resize(cfg.n, 0);
        Ok(SortBench { cfg, cutoff: cfg.resolve_cutoff(for_p), data, buf })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u32> {
        self.data
    }

    pub fn run(&mut self, mode: Mode) {
        let ins = self.cfg.insertion_threshold;
        match mode {
            Mode::Baseline => quicksort(&mut self.data, ins),
            Mode::Elision => cilksort(Elided, &mut self.data, &mut self.buf, self.cutoff, ins),
            Mode::Parallel => cilksort(Parallel, &mut self.data, &mut self.buf, self.cutoff, ins),
        }
    }

    pub fn run_with<S: ForkJoin>(&mut self, s: S) {
        cilksort(s, &mut self.data, &mut self.buf, self.cutoff, self.cfg.insertion_threshold);
    }

    pub fn is_sorted(&self) -> bool {
        self.data.windows(2).all(|w| w[0] <= w[1])
    }
}

/// FNV-1a over the little-endian bytes of `data`.
pub fn digest_u32(data: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in data {
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{CountForks, Runtime, RuntimeConfig};
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    fn std_sorted(mut v: Vec<u32>) -> Vec<u32> {
        v.sort_unstable();
        v
    }

    #[test]
    fn degenerate_inputs_unchanged() {
        for n in [0usize, 1] {
            let mut v = generate_input(n, 3);
            let orig = v.clone();
            let mut buf = vec![0; n];
            cilksort(Elided, &mut v, &mut buf, 1, 20);
            assert_eq!(v, orig);
            quicksort(&mut v, 20);
            assert_eq!(v, orig);
        }
    }

    #[test]
    fn quicksort_matches_std() {
        for (n, seed) in [(10_000, 1), (21, 2), (1000, 3)] {
            let input = generate_input(n, seed);
            let mut v = input.clone();
            quicksort(&mut v, 20);
            assert_eq!(v, std_sorted(input));
        }
        let mut dups: Vec<u32> = (0..5000).map(|i| i % 7).collect();
        quicksort(&mut dups, 20);
        assert!(dups.windows(2).all(|w| w[0] <= w[1]));
        let mut desc: Vec<u32> = (0..5000).rev().collect();
        quicksort(&mut desc, 1);
        assert_eq!(desc, (0..5000).collect::<Vec<_>>());
    }

    #[test]
    fn small_merges() {
        let mut out = [0; 2];
        parallel_merge(Elided, &[], &[1, 2], &mut out, 1);
        assert_eq!(out, [1, 2]);
        let mut out = [0; 6];
        parallel_merge(Elided, &[1, 3, 5], &[2, 4, 6], &mut out, 2);
        assert_eq!(out, [1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn merge_is_stable() {
        // Pairs compare by key only; tags show provenance.
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        struct K(u32, u32);
        impl PartialOrd for K {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for K {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                self.0.cmp(&o.0)
            }
        }
        let a: Vec<K> = (0..300).map(|i| K(i / 10, 0)).collect();
        let b: Vec<K> = (0..500).map(|i| K(i / 17, 1)).collect();
        let mut seq = vec![K(0, 0); 800];
        sequential_merge(&a, &b, &mut seq);
        for cutoff in [1, 2, 7, 64, 1000] {
            let mut par = vec![K(0, 0); 800];
            parallel_merge(Elided, &a, &b, &mut par, cutoff);
            assert_eq!(par, seq, "cutoff {cutoff}");
        }
    }

    #[test]
    fn parallel_sort_matches_baseline() {
        let cfg = SortBenchConfig::new(10_000, Cutoff::Fixed(100)).with_seed(42);
        let mut base = SortBench::new(cfg, 1).unwrap();
        base.run(Mode::Baseline);
        for p in [1, 2, 4] {
            let mut par = SortBench::new(cfg, p).unwrap();
            let rt = Runtime::with_config(RuntimeConfig::new(p).oversubscribe(true)).unwrap();
            let ((), stats) = rt.launch(|| par.run(Mode::Parallel)).unwrap();
            stats.check_invariants().unwrap();
            assert_eq!(par.data(), base.data(), "p={p}");
        }
        let mut el = SortBench::new(cfg, 1).unwrap();
        el.run(Mode::Elision);
        assert_eq!(el.data(), base.data());
    }

    #[test]
    fn adaptive_cutoff_rounding() {
        let cfg = SortBenchConfig::new(100, Cutoff::PerProc(8000));
        assert_eq!(cfg.resolve_cutoff(1), 8000);
        assert_eq!(cfg.resolve_cutoff(3), 2667);
        assert_eq!(cfg.resolve_cutoff(7), 1143);
        assert_eq!(cfg.resolve_cutoff(40), 200);
        assert_eq!(cfg.resolve_cutoff(1000), 20);
        assert_eq!(SortBenchConfig::new(100, Cutoff::Fixed(300)).resolve_cutoff(8), 300);
    }

    #[test]
    fn cutoff_parsing_and_validation() {
        assert_eq!("8000/P".parse::<Cutoff>().unwrap(), Cutoff::PerProc(8000));
        assert_eq!("1000".parse::<Cutoff>().unwrap(), Cutoff::Fixed(1000));
        assert!("8000/Q".parse::<Cutoff>().is_err());
        assert!(SortBenchConfig::new(10, Cutoff::Fixed(5)).validate().is_err());
        assert!(SortBenchConfig::new(0, Cutoff::Fixed(50)).validate().is_err());
    }

    #[test]
    fn presets_and_params() {
        let cfg = SortBenchConfig::preset("n10m_c8000_per_p").unwrap();
        assert_eq!((cfg.n, cfg.cutoff), (10_000_000, Cutoff::PerProc(8000)));
        let p = Params::new().with("preset", "n200k_c10k").with("seed", 9);
        let cfg = SortBenchConfig::from_params(&p).unwrap();
        assert_eq!((cfg.n, cfg.cutoff, cfg.seed), (200_000, Cutoff::Fixed(10_000), 9));
        assert_eq!(SortBenchConfig::from_params(&cfg.to_params()).unwrap(), cfg);
        let adaptive = SortBenchConfig::new(5000, Cutoff::PerProc(8000));
        assert_eq!(SortBenchConfig::from_params(&adaptive.to_params()).unwrap(), adaptive);
        assert!(SortBenchConfig::preset("nope").is_err());
        assert_eq!(PRESETS.len(), 6);
    }

    #[test]
    fn input_is_reproducible() {
        assert_eq!(generate_input(100, 7), generate_input(100, 7));
        assert_ne!(generate_input(100, 7), generate_input(100, 8));
    }

    fn count_forks(n: usize, cutoff: usize) -> u64 {
        let forks = AtomicU64::new(0);
        let mut v = generate_input(n, 1);
        let mut buf = vec![0; n];
        cilksort(CountForks { inner: Elided, forks: &forks }, &mut v, &mut buf, cutoff, 20);
        forks.load(Ordering::Relaxed)
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(seed in any::<u64>(), la in 0usize..3000, lb in 0usize..3000, cutoff in 1usize..500) {
            let mut a = generate_input(la, seed);
            let mut b = generate_input(lb, seed ^ 1);
            // Narrow key range to force ties.
            a.iter_mut().chain(b.iter_mut()).for_each(|x| *x %= 97);
            a.sort_unstable();
            b.sort_unstable();
            let mut seq = vec![0; la + lb];
            sequential_merge(&a, &b, &mut seq);
            let mut par = vec![0; la + lb];
            parallel_merge(Elided, &a, &b, &mut par, cutoff);
            prop_assert_eq!(par, seq);
        }

        #[test]
        fn sort_is_sorted_permutation(seed in any::<u64>(), n in 0usize..5000, cutoff in 20usize..400) {
            let input = generate_input(n, seed);
            let mut v = input.clone();
            let mut buf = vec![0; n];
            cilksort(Elided, &mut v, &mut buf, cutoff, 20);
            prop_assert_eq!(v, std_sorted(input));
        }

        #[test]
        fn raising_cutoff_never_adds_forks(n in 1usize..20_000, c1 in 20usize..2000, extra in 0usize..5000) {
            prop_assert!(count_forks(n, c1 + extra) <= count_forks(n, c1));
        }
    }
}
