//! Fork-join runtime with idle-time accounting, benchmark programs, an
//! experiment harness, and factored speedup analysis.

pub mod benchmarks;
pub mod harness;
pub mod measures;
pub mod report;
pub mod runtime;
