use serde::{Deserialize, Serialize};

/// Per-worker counters for one run. Written only by the owning worker while the
/// run is live and read after every worker has quiesced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub worker_id: usize,
    /// Nanoseconds spent waiting to acquire work.
    pub idle_total: u64,
    pub idle_phase_count: u64,
    pub steal_success_count: u64,
    pub steal_attempt_count: u64,
}

/// Result of one [`launch`](super::launch): P, T_P and I_P plus the per-worker
/// breakdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub num_workers: usize,
    /// Wall-clock nanoseconds between the start and end clock reads.
    pub wall_time: u64,
    /// Sum of per-worker idle nanoseconds.
    pub idle_total: u64,
    pub per_worker: Vec<WorkerStats>,
    pub total_steals: u64,
    pub total_idle_phases: u64,
    /// Whether idle-phase timing was compiled into this run.
    pub instrumented: bool,
}

impl RunStats {
    pub(crate) fn from_workers(wall_time: u64, mut per_worker: Vec<WorkerStats>, instrumented: bool) -> Self {
        per_worker.sort_by_key(|w| w.worker_id);
        RunStats {
            num_workers: per_worker.len(),
            wall_time,
            idle_total: per_worker.iter().map(|w| w.idle_total).sum(),
            total_steals: per_worker.iter().map(|w| w.steal_success_count).sum(),
            total_idle_phases: per_worker.iter().map(|w| w.idle_phase_count).sum(),
            per_worker,
            instrumented,
        }
    }

    pub fn wall_secs(&self) -> f64 {
        super::clock::ns_to_secs(self.wall_time)
    }

    pub fn idle_secs(&self) -> f64 {
        super::clock::ns_to_secs(self.idle_total)
    }

    /// Checks the accounting identities every run must satisfy. Returns a
    /// description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let p = self.num_workers as u64;
        if self.per_worker.len() != self.num_workers {
            return Err(format!("{} worker records for {} workers", self.per_worker.len(), p));
        }
        let sum: u64 = self.per_worker.iter().map(|w| w.idle_total).sum();
        if sum != self.idle_total {
            return Err(format!("idle_total {} != sum of workers {}", self.idle_total, sum));
        }
        if self.idle_total > p * self.wall_time {
            return Err(format!("idle_total {} exceeds P*wall {}", self.idle_total, p * self.wall_time));
        }
        if self.total_idle_phases > (p - 1) + self.total_steals {
            return Err(format!(
                "{} idle phases exceed (P-1) + steals = {}",
                self.total_idle_phases,
                (p - 1) + self.total_steals
            ));
        }
        for w in &self.per_worker {
            if w.idle_total > self.wall_time {
                return Err(format!("worker {} idle {} exceeds wall {}", w.worker_id, w.idle_total, self.wall_time));
            }
            if w.idle_phase_count > 1 + w.steal_success_count {
                return Err(format!(
                    "worker {} has {} idle phases but {} steals",
                    w.worker_id, w.idle_phase_count, w.steal_success_count
                ));
            }
            if w.steal_success_count > w.steal_attempt_count {
                return Err(format!("worker {} has more steals than attempts", w.worker_id));
            }
        }
        let busy: u64 = self.per_worker.iter().map(|w| self.wall_time - w.idle_total).sum();
        if busy + self.idle_total != p * self.wall_time {
            return Err("busy + idle does not partition P*wall".into());
        }
        Ok(())
    }
}
