//! Monotonic nanosecond clock used for wall-time and idle-phase measurement.

use std::sync::OnceLock;
use std::time::Instant;

static EPOCH: OnceLock<Instant> = OnceLock::new();

/// Nanoseconds elapsed since a process-wide epoch.
///
/// Backed by the platform monotonic clock (`CLOCK_MONOTONIC` through the vDSO on
/// Linux), so readings taken on different threads are comparable and never go
/// backwards.
#[inline]
pub fn now() -> u64 {
    let epoch = *EPOCH.get_or_init(Instant::now);
    Instant::now().saturating_duration_since(epoch).as_nanos() as u64
}

/// Converts integer nanoseconds to float seconds.
#[inline]
pub fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 / 1e9
}
