//! Per-worker scheduling loops and idle-phase accounting.
//!
//! A worker is idle from the first failed pop of its empty local deque until it
//! either obtains a stolen job, sees the join it waits on complete, or the run
//! terminates. Only the owner writes its counters.
//!
//! Phase counting follows the continuation-stealing view of a join: a wait for
//! a stolen child that ends because the child finished is charged to the thief
//! (which goes idle at that same instant) rather than opening a phase of its own.
//! Its duration still counts toward the waiting worker's idle time. Every counted
//! phase therefore ends in a steal or at run termination, which is what bounds
//! the phase count by `(P - 1) + steals`.

use std::cell::{Cell, RefCell};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::time::Duration;

use crossbeam_deque::{Steal, Stealer, Worker};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use super::clock::now;
use super::job::{JobRef, Latch, PanicPayload, StackJob};
use super::stats::WorkerStats;

thread_local! {
    static CURRENT: Cell<*const WorkerThread> = const { Cell::new(ptr::null()) };
}

/// State shared by all workers of one run.
pub(crate) struct Shared {
    pub(crate) stealers: Vec<Stealer<JobRef>>,
    pub(crate) arrived: AtomicUsize,
    pub(crate) started: AtomicBool,
    pub(crate) done: AtomicBool,
    pub(crate) run_start: AtomicU64,
    pub(crate) run_end: AtomicU64,
    pub(crate) oversubscribed: bool,
}

impl Shared {
    pub(crate) fn new(stealers: Vec<Stealer<JobRef>>, oversubscribed: bool) -> Self {
        Shared {
            stealers,
            arrived: AtomicUsize::new(0),
            started: AtomicBool::new(false),
            done: AtomicBool::new(false),
            run_start: AtomicU64::new(0),
            run_end: AtomicU64::new(0),
            oversubscribed,
        }
    }
}

pub(crate) struct WorkerThread {
    index: usize,
    deque: Worker<JobRef>,
    shared: *const Shared,
    rng: RefCell<SmallRng>,
    wait_fn: fn(&WorkerThread, &Latch),
    idle_total: Cell<u64>,
    idle_phases: Cell<u64>,
    steals: Cell<u64>,
    steal_attempts: Cell<u64>,
}

impl WorkerThread {
    pub(crate) fn new<const INSTRUMENT: bool>(index: usize, deque: Worker<JobRef>, shared: &Shared) -> Self {
        WorkerThread {
            index,
            deque,
            shared,
            rng: RefCell::new(SmallRng::seed_from_u64(0x9e37_79b9_7f4a_7c15 ^ index as u64)),
            wait_fn: wait_until::<INSTRUMENT>,
            idle_total: Cell::new(0),
            idle_phases: Cell::new(0),
            steals: Cell::new(0),
            steal_attempts: Cell::new(0),
        }
    }

    /// The worker running on this thread, or null outside a run.
    #[inline]
    pub(crate) fn current() -> *const WorkerThread {
        CURRENT.with(Cell::get)
    }

    /// Installs `self` as the current thread's worker for the duration of `f`.
    pub(crate) fn enter<R>(&self, f: impl FnOnce() -> R) -> R {
        struct Reset;
        impl Drop for Reset {
            fn drop(&mut self) {
                CURRENT.with(|c| c.set(ptr::null()));
            }
        }
        CURRENT.with(|c| c.set(self as *const _));
        let _reset = Reset;
        f()
    }

    #[inline]
    fn shared(&self) -> &Shared {
        // SAFETY: Shared outlives every worker thread of the run (scoped threads).
        unsafe { &*self.shared }
    }

    pub(crate) fn stats(&self) -> WorkerStats {
        WorkerStats {
            worker_id: self.index,
            idle_total: self.idle_total.get(),
            idle_phase_count: self.idle_phases.get(),
            steal_success_count: self.steals.get(),
            steal_attempt_count: self.steal_attempts.get(),
        }
    }

    #[inline]
    fn add_idle(&self, ns: u64) {
        self.idle_total.set(self.idle_total.get() + ns);
    }

    /// One steal attempt against a uniformly random other worker.
    fn steal_once(&self) -> Option<JobRef> {
        let stealers = &self.shared().stealers;
        let others = stealers.len() - 1;
        if others == 0 {
            return None;
        }
        let mut victim = self.rng.borrow_mut().gen_range(0..others);
        if victim >= self.index {
            victim += 1;
        }
        self.steal_attempts.set(self.steal_attempts.get() + 1);
        match stealers[victim].steal() {
            Steal::Success(job) => {
                self.steals.set(self.steals.get() + 1);
                Some(job)
            }
            Steal::Empty | Steal::Retry => None,
        }
    }

    fn backoff(&self, fails: &mut u32) {
        *fails = fails.saturating_add(1);
        if *fails < 64 {
            std::hint::spin_loop();
        } else if self.shared().oversubscribed && *fails >= 1024 {
            std::thread::sleep(Duration::from_micros(20));
        } else {
            std::thread::yield_now();
        }
    }

    /// Loop run by every worker except the one that owns the root task. The
    /// worker starts the run idle and stays in the loop until termination.
    pub(crate) fn main_loop<const INSTRUMENT: bool>(&self) {
        let shared = self.shared();
        while !shared.started.load(Ordering::Acquire) {
            if shared.done.load(Ordering::Acquire) {
                return;
            }
            std::thread::yield_now();
        }
        let mut phase_start = shared.run_start.load(Ordering::Relaxed);
        let mut fails = 0u32;
        loop {
            if shared.done.load(Ordering::Acquire) {
                if INSTRUMENT {
                    let end = shared.run_end.load(Ordering::Relaxed);
                    self.add_idle(end.saturating_sub(phase_start));
                    self.idle_phases.set(self.idle_phases.get() + 1);
                }
                return;
            }
            match self.steal_once() {
                Some(job) => {
                    if INSTRUMENT {
                        self.add_idle(now().saturating_sub(phase_start));
                        self.idle_phases.set(self.idle_phases.get() + 1);
                    }
                    // SAFETY: stolen jobs are executed exactly once by the thief.
                    unsafe { job.execute() };
                    debug_assert!(self.deque.is_empty());
                    if INSTRUMENT {
                        phase_start = now();
                    }
                    fails = 0;
                }
                None => self.backoff(&mut fails),
            }
        }
    }

    #[inline]
    fn wait_until(&self, latch: &Latch) {
        (self.wait_fn)(self, latch)
    }
}

/// Idle wait for a stolen right-hand job. Entered with an empty local deque.
fn wait_until<const INSTRUMENT: bool>(wt: &WorkerThread, latch: &Latch) {
    let mut phase_start = if INSTRUMENT { now() } else { 0 };
    let mut fails = 0u32;
    loop {
        if latch.probe() {
            if INSTRUMENT {
                wt.add_idle(now().saturating_sub(phase_start));
            }
            return;
        }
        match wt.steal_once() {
            Some(job) => {
                if INSTRUMENT {
                    wt.add_idle(now().saturating_sub(phase_start));
                    wt.idle_phases.set(wt.idle_phases.get() + 1);
                }
                // SAFETY: as in main_loop.
                unsafe { job.execute() };
                if latch.probe() {
                    return;
                }
                if INSTRUMENT {
                    phase_start = now();
                }
                fails = 0;
            }
            None => wt.backoff(&mut fails),
        }
    }
}

/// Runs `a` and `b`, making `b` stealable while the calling worker runs `a`.
/// Outside a run both closures execute sequentially on the calling thread.
pub fn fork2<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    let wt = WorkerThread::current();
    if wt.is_null() {
        return (a(), b());
    }
    // SAFETY: CURRENT is only non-null while the worker is alive on this thread.
    let wt = unsafe { &*wt };

    let job_b = StackJob::new(b);
    let job_b_ref = job_b.as_job_ref();
    let job_b_id = job_b_ref.id();
    wt.deque.push(job_b_ref);

    let result_a = panic::catch_unwind(AssertUnwindSafe(a));

    // Reclaim b: pop it back, or help with other local work, or wait for the thief.
    let mut inline_b: Option<Result<RB, PanicPayload>> = None;
    while !job_b.latch.probe() {
        match wt.deque.pop() {
            Some(job) if job.id() == job_b_id => {
                inline_b = Some(panic::catch_unwind(AssertUnwindSafe(|| job_b.run_inline())));
                break;
            }
            // SAFETY: a job from our own deque that nobody else has taken.
            Some(job) => unsafe { job.execute() },
            None => {
                wt.wait_until(&job_b.latch);
                break;
            }
        }
    }
    let result_b = match inline_b {
        Some(r) => r,
        // SAFETY: the loop exits only with the latch set or b run inline.
        None => unsafe { job_b.into_result() },
    };

    match (result_a, result_b) {
        (Ok(ra), Ok(rb)) => (ra, rb),
        (Err(p), _) | (_, Err(p)) => panic::resume_unwind(p),
    }
}
