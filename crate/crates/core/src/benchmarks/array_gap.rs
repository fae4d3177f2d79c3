//! Array microbenchmark: `r` passes over `m` 64-bit cells, each pass visiting
//! the cells in gap order and applying `l` dependent additions to each.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::runtime::{for_each_leaf, Elided, ForkJoin, Parallel, TaskRange};

use super::{BenchError, Mode, Params};

/// Total additions per sweep configuration, `m * r`, held fixed across sizes.
pub const SWEEP_TOTAL_OPS: u64 = 400_000_000;
pub const DEFAULT_GRAIN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayBenchConfig {
    pub m: usize,
    pub l: u64,
    pub g: usize,
    pub r: u64,
    pub grain: usize,
    pub sweep: bool,
}

impl ArrayBenchConfig {
    pub const PARAM_NAMES: &'static [&'static str] = &["m", "l", "g", "r", "grain", "sweep"];

    pub fn new(m: usize, l: u64, g: usize, r: u64) -> Self {
        ArrayBenchConfig { m, l, g, r, grain: DEFAULT_GRAIN, sweep: false }
    }

    /// Repetitions keeping `m * r` at [`SWEEP_TOTAL_OPS`].
    pub fn sweep_repetitions(m: usize) -> u64 {
        SWEEP_TOTAL_OPS.div_ceil(m.max(1) as u64)
    }

    /// Configuration for one point of a size sweep.
    pub fn sweep(m: usize, l: u64, g: usize) -> Self {
        ArrayBenchConfig { sweep: true, ..Self::new(m, l, g, Self::sweep_repetitions(m)) }
    }

    pub fn with_grain(mut self, grain: usize) -> Self {
        self.grain = grain;
        self
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let positive = |name: &str, v: u64| {
            if v == 0 {
                Err(BenchError::Config(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        positive("m", self.m as u64)?;
        positive("l", self.l)?;
        positive("g", self.g as u64)?;
        positive("r", self.r)?;
        positive("grain", self.grain as u64)?;
        if !self.m.is_multiple_of(self.g) {
            return Err(BenchError::Config(format!(
                "gap {} does not divide array size {}; the gap order would not be a permutation",
                self.g, self.m
            )));
        }
        if self.sweep && self.r != Self::sweep_repetitions(self.m) {
            return Err(BenchError::Config(format!(
                "sweep mode requires r = ceil({SWEEP_TOTAL_OPS}/m) = {}, got {}",
                Self::sweep_repetitions(self.m),
                self.r
            )));
        }
        Ok(())
    }

    /// Reads a configuration. Missing `r` defaults to 1, or to the sweep value
    /// when `sweep=true`.
    pub fn from_params(p: &Params) -> Result<Self, BenchError> {
        p.check_known(Self::PARAM_NAMES)?;
        let m = p.get_usize("m")?.ok_or(BenchError::MissingParam("m"))?;
        let sweep = p.get_bool("sweep")?.unwrap_or(false);
        let default_r = if sweep { Self::sweep_repetitions(m) } else { 1 };
        let cfg = ArrayBenchConfig {
            m,
            l: p.get_u64("l")?.unwrap_or(1),
            g: p.get_usize("g")?.unwrap_or(1),
            r: p.get_u64("r")?.unwrap_or(default_r),
            grain: p.get_usize("grain")?.unwrap_or(DEFAULT_GRAIN),
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_params(&self) -> Params {
        let p = Params::new()
            .with("m", self.m as u64)
            .with("l", self.l)
            .with("g", self.g as u64)
            .with("r", self.r)
            .with("grain", self.grain as u64);
        if self.sweep {
            p.with("sweep", true)
        } else {
            p
        }
    }

    /// The checksum every correct run produces: each cell ends at `r * l`.
    pub fn expected_checksum(&self) -> u64 {
        (self.m as u64).wrapping_mul(self.r).wrapping_mul(self.l)
    }
}

/// Position of the `i`-th processed cell: `(i*g + floor(i*g/m)) mod m`.
#[inline]
pub fn gap_index(i: usize, g: usize, m: usize) -> usize {
    let ig = i as u128 * g as u128;
    ((ig + ig / m as u128) % m as u128) as usize
}

/// [`gap_index`] with its preconditions checked.
pub fn checked_gap_index(i: usize, g: usize, m: usize) -> Result<usize, BenchError> {
    if m == 0 || g == 0 || !m.is_multiple_of(g) {
        return Err(BenchError::Config(format!("gap {g} does not divide array size {m}")));
    }
    if i >= m {
        return Err(BenchError::Config(format!("index {i} out of range for size {m}")));
    }
    Ok(gap_index(i, g, m))
}

/// Walks `gap_index(i, g, m)` for consecutive `i` without a division per step.
#[derive(Debug, Clone, Copy)]
struct GapCursor {
    rem: usize,
    quot: usize,
    g: usize,
    m: usize,
}

impl GapCursor {
    fn at(i: usize, g: usize, m: usize) -> Self {
        let ig = i as u128 * g as u128;
        GapCursor { rem: (ig % m as u128) as usize, quot: (ig / m as u128) as usize, g, m }
    }

    #[inline(always)]
    fn index(&self) -> usize {
        // quot < g <= m on the valid domain, so one subtraction suffices.
        let s = self.rem + self.quot;
        if s >= self.m {
            s - self.m
        } else {
            s
        }
    }

    #[inline(always)]
    fn advance(&mut self) {
        self.rem += self.g;
        if self.rem >= self.m {
            self.rem -= self.m;
            self.quot += 1;
        }
    }
}

#[inline(always)]
fn add_one(v: u64) -> u64 {
    #[cfg(target_arch = "x86_64")]
    {
        let mut v = v;
        // SAFETY: register-only arithmetic.
        unsafe { std::arch::asm!("add {0}, 1", inout(reg) v, options(pure, nomem, nostack)) };
        v
    }
    #[cfg(target_arch = "aarch64")]
    {
        let mut v = v;
        // SAFETY: register-only arithmetic.
        unsafe { std::arch::asm!("add {0}, {0}, #1", inout(reg) v, options(pure, nomem, nostack)) };
        v
    }
    #[cfg(not(any(target_arch = "x86_64", target_arch = "aarch64")))]
    {
        std::hint::black_box(v).wrapping_add(1)
    }
}

/// `l` dependent additions. Opaque to the optimizer so the chain is executed
/// rather than folded into one add of `l`.
#[inline(always)]
fn add_chain(mut v: u64, l: u64) -> u64 {
    for _ in 0..l {
        v = add_one(v);
    }
    v
}

#[derive(Clone, Copy)]
struct CellsPtr(*mut u64);
// SAFETY: concurrent leaves write disjoint cells (gap order is a permutation).
unsafe impl Send for CellsPtr {}
unsafe impl Sync for CellsPtr {}

/// A prepared array, zeroed and paged in.
pub struct ArrayBench {
    cfg: ArrayBenchConfig,
    cells: Vec<u64>,
}

impl ArrayBench {
    pub fn new(cfg: ArrayBenchConfig) -> Result<Self, BenchError> {
        cfg.validate()?;
        let mut cells = Vec::new();
        cells.try_reserve_exact(cfg.m).map_err(|_| BenchError::Alloc { bytes: cfg.m as u64 * 8 })?;
        cells.resize(cfg.m, 0u64);
        touch_pages(&mut cells);
        Ok(ArrayBench { cfg, cells })
    }

    pub fn config(&self) -> &ArrayBenchConfig {
        &self.cfg
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn reset(&mut self) {
        self.cells.iter_mut().for_each(|c| *c = 0);
    }

    pub fn run(&mut self, mode: Mode) {
        match mode {
            Mode::Baseline => self.run_baseline(),
            Mode::Elision => self.run_with::<Elided, false>(Elided, None),
            Mode::Parallel => self.run_with::<Parallel, false>(Parallel, None),
        }
    }

    /// Like [`ArrayBench::run`] but counts body executions into `counter`.
    pub fn run_counted(&mut self, mode: Mode, counter: &AtomicU64) {
        match mode {
            Mode::Baseline => {
                self.run_baseline();
                counter.fetch_add(self.cfg.m as u64 * self.cfg.r, Ordering::Relaxed);
            }
            Mode::Elision => self.run_with::<Elided, true>(Elided, Some(counter)),
            Mode::Parallel => self.run_with::<Parallel, true>(Parallel, Some(counter)),
        }
    }

    fn run_baseline(&mut self) {
        let ArrayBenchConfig { m, l, g, r, .. } = self.cfg;
        let cells = &mut self.cells[..];
        for _ in 0..r {
            let mut cur = GapCursor::at(0, g, m);
            for _ in 0..m {
                let idx = cur.index();
                cells[idx] = add_chain(cells[idx], l);
                cur.advance();
            }
        }
    }

    fn run_with<S: ForkJoin, const COUNT: bool>(&mut self, s: S, counter: Option<&AtomicU64>) {
        let ArrayBenchConfig { m, l, g, r, grain, .. } = self.cfg;
        let ptr = CellsPtr(self.cells.as_mut_ptr());
        let range = TaskRange::new(0, m, grain).expect("validated configuration");
        let leaf = move |span: Range<usize>| {
            let p = ptr;
            let mut cur = GapCursor::at(span.start, g, m);
            for _ in span.clone() {
                let idx = cur.index();
                // SAFETY: idx < m, and each idx belongs to exactly one leaf per pass.
                unsafe {
                    let c = p.0.add(idx);
                    *c = add_chain(*c, l);
                }
                cur.advance();
            }
            if COUNT {
                if let Some(c) = counter {
                    c.fetch_add(span.len() as u64, Ordering::Relaxed);
                }
            }
        };
        for _ in 0..r {
            for_each_leaf(s, range, &leaf);
        }
    }

    /// Sum of all cells, wrapping at 2^64.
    pub fn checksum(&self) -> u64 {
        self.cells.iter().fold(0u64, |acc, &c| acc.wrapping_add(c))
    }
}

/// Writes one word per page so page faults happen before timing starts.
fn touch_pages(cells: &mut [u64]) {
    const WORDS_PER_PAGE: usize = 4096 / 8;
    for c in cells.iter_mut().step_by(WORDS_PER_PAGE) {
        // SAFETY: c is a valid, aligned reference.
        unsafe { std::ptr::write_volatile(c, 0) };
    }
}
