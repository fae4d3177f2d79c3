use std::any::Any;
use std::cell::UnsafeCell;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};

/// Type-erased pointer to a job living on some worker's stack.
pub(crate) struct JobRef {
    data: *const (),
    exec: unsafe fn(*const ()),
}

// SAFETY: a JobRef is only created for StackJobs whose closure and result are
// Send, and the owning frame does not return before the job's latch is set.
unsafe impl Send for JobRef {}

impl JobRef {
    #[inline]
    pub(crate) fn id(&self) -> *const () {
        self.data
    }

    /// # Safety
    /// Must be called at most once per job, while the referenced job is alive.
    #[inline]
    pub(crate) unsafe fn execute(self) {
        (self.exec)(self.data)
    }
}

pub(crate) struct Latch {
    set: AtomicBool,
}

impl Latch {
    pub(crate) const fn new() -> Self {
        Latch { set: AtomicBool::new(false) }
    }

    #[inline]
    pub(crate) fn probe(&self) -> bool {
        self.set.load(Ordering::Acquire)
    }

    #[inline]
    fn set(&self) {
        self.set.store(true, Ordering::Release);
    }
}

pub(crate) type PanicPayload = Box<dyn Any + Send + 'static>;

/// The right-hand side of a fork, stored in the forking frame.
pub(crate) struct StackJob<F, R> {
    func: UnsafeCell<Option<F>>,
    result: UnsafeCell<Option<Result<R, PanicPayload>>>,
    pub(crate) latch: Latch,
}

impl<F, R> StackJob<F, R>
where
    F: FnOnce() -> R + Send,
    R: Send,
{
    pub(crate) fn new(func: F) -> Self {
        StackJob { func: UnsafeCell::new(Some(func)), result: UnsafeCell::new(None), latch: Latch::new() }
    }

    pub(crate) fn as_job_ref(&self) -> JobRef {
        JobRef { data: self as *const Self as *const (), exec: Self::execute_erased }
    }

    unsafe fn execute_erased(this: *const ()) {
        let this = &*(this as *const Self);
        let func = (*this.func.get()).take().expect("job executed twice");
        let outcome = panic::catch_unwind(AssertUnwindSafe(func));
        *this.result.get() = Some(outcome);
        this.latch.set();
    }

    /// Runs the job on the current thread after popping it back from the local deque.
    pub(crate) fn run_inline(&self) -> R {
        // SAFETY: the job was popped by its owner, so no other thread can reach it.
        let func = unsafe { (*self.func.get()).take() }.expect("job executed twice");
        func()
    }

    /// # Safety
    /// The latch must be set.
    pub(crate) unsafe fn into_result(self) -> Result<R, PanicPayload> {
        debug_assert!(self.latch.probe());
        self.result.into_inner().expect("latch set without a result")
    }
}
