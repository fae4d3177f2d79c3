use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use super::RuntimeError;

/// How a divide-and-conquer algorithm combines two independent halves.
///
/// Benchmarks are written once against this trait: [`Parallel`] forks through
/// the runtime, [`Elided`] replaces every fork with a plain sequence.
pub trait ForkJoin: Copy + Send + Sync {
    fn fork2<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl ForkJoin for Parallel {
    #[inline]
    fn fork2<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        super::fork2(a, b)
    }
}

/// The sequential elision: left then right, no scheduler involvement.
#[derive(Debug, Clone, Copy, Default)]
pub struct Elided;

impl ForkJoin for Elided {
    #[inline]
    fn fork2<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        (a(), b())
    }
}

/// Wraps another strategy and counts executed forks. For structural tests only.
#[derive(Debug, Clone, Copy)]
pub struct CountForks<'a, S> {
    pub inner: S,
    pub forks: &'a AtomicU64,
}

impl<S: ForkJoin> ForkJoin for CountForks<'_, S> {
    fn fork2<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        self.forks.fetch_add(1, Ordering::Relaxed);
        self.inner.fork2(a, b)
    }
}

/// Half-open index range `[lo, hi)` with the size below which it is processed
/// sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskRange {
    lo: usize,
    hi: usize,
    grain: usize,
}

impl TaskRange {
    pub fn new(lo: usize, hi: usize, grain: usize) -> Result<Self, RuntimeError> {
        if grain == 0 {
            return Err(RuntimeError::ZeroGrain);
        }
        if lo > hi {
            return Err(RuntimeError::InvertedRange { lo, hi });
        }
        Ok(TaskRange { lo, hi, grain })
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn grain(&self) -> usize {
        self.grain
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }
}

/// Splits `range` at midpoints until pieces are at most `grain` long and hands
/// each piece to `leaf`.
pub fn for_each_leaf<S, L>(strategy: S, range: TaskRange, leaf: &L)
where
    S: ForkJoin,
    L: Fn(Range<usize>) + Sync,
{
    fn go<S: ForkJoin, L: Fn(Range<usize>) + Sync>(s: S, lo: usize, hi: usize, grain: usize, leaf: &L) {
        if hi - lo <= grain {
            if lo < hi {
                leaf(lo..hi);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        s.fork2(|| go(s, lo, mid, grain, leaf), || go(s, mid, hi, grain, leaf));
    }
    go(strategy, range.lo, range.hi, range.grain, leaf)
}

/// Invokes `body` exactly once for every index of `range`.
pub fn parallel_for_with<S, B>(strategy: S, range: TaskRange, body: &B)
where
    S: ForkJoin,
    B: Fn(usize) + Sync,
{
    for_each_leaf(strategy, range, &|r: Range<usize>| r.for_each(body));
}

/// [`parallel_for_with`] using the runtime's fork.
pub fn parallel_for<B>(range: TaskRange, body: &B)
where
    B: Fn(usize) + Sync,
{
    parallel_for_with(Parallel, range, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{Runtime, RuntimeConfig};
    use std::sync::atomic::AtomicU32;
    use std::sync::Mutex;

    #[test]
    fn range_validation() {
        assert!(matches!(TaskRange::new(0, 10, 0), Err(RuntimeError::ZeroGrain)));
        assert!(matches!(TaskRange::new(5, 4, 1), Err(RuntimeError::InvertedRange { .. })));
        assert!(TaskRange::new(3, 3, 1).unwrap().is_empty());
    }

    #[test]
    fn below_grain_is_one_leaf() {
        let leaves = Mutex::new(Vec::new());
        for_each_leaf(Parallel, TaskRange::new(0, 10, 1000).unwrap(), &|r| leaves.lock().unwrap().push(r));
        assert_eq!(*leaves.lock().unwrap(), vec![0..10]);
    }

    #[test]
    fn empty_range_invokes_nothing() {
        let calls = AtomicU32::new(0);
        parallel_for(TaskRange::new(0, 0, 1).unwrap(), &|_| {
            calls.fetch_add(1, Ordering::Relaxed);
        });
        assert_eq!(calls.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn every_cell_touched_once_in_parallel() {
        let cells: Vec<AtomicU32> = (0..4000).map(|_| AtomicU32::new(0)).collect();
        let rt = Runtime::with_config(RuntimeConfig::new(4).oversubscribe(true)).unwrap();
        let ((), stats) = rt
            .launch(|| {
                parallel_for(TaskRange::new(0, 4000, 1000).unwrap(), &|i| {
                    cells[i].fetch_add(1, Ordering::Relaxed);
                })
            })
            .unwrap();
        // Sequential oracle: one increment per index.
        let mut oracle = vec![0u32; 4000];
        for c in oracle.iter_mut() {
            *c += 1;
        }
        let got: Vec<u32> = cells.iter().map(|c| c.load(Ordering::Relaxed)).collect();
        assert_eq!(got, oracle);
        stats.check_invariants().unwrap();
    }

    #[test]
    fn leaves_respect_grain_and_cover_range() {
        let leaves = Mutex::new(Vec::new());
        for_each_leaf(Elided, TaskRange::new(7, 1234, 100).unwrap(), &|r| leaves.lock().unwrap().push(r));
        let leaves = leaves.into_inner().unwrap();
        assert!(leaves.iter().all(|r| r.len() <= 100 && !r.is_empty()));
        assert_eq!(leaves.first().unwrap().start, 7);
        assert_eq!(leaves.last().unwrap().end, 1234);
        assert!(leaves.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn counting_wrapper_counts_forks() {
        let forks = AtomicU64::new(0);
        let s = CountForks { inner: Elided, forks: &forks };
        for_each_leaf(s, TaskRange::new(0, 8, 1).unwrap(), &|_| {});
        // A full binary split of 8 unit leaves has 7 internal nodes.
        assert_eq!(forks.load(Ordering::Relaxed), 7);
    }
}
