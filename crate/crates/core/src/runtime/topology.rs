//! Physical-core discovery and worker pinning.

use std::collections::BTreeSet;

/// Number of physical cores available to this process.
pub fn physical_cores() -> usize {
    let from_topology = pin_targets().len();
    if from_topology > 0 {
        from_topology
    } else {
        num_cpus::get_physical().max(1)
    }
}

/// Logical CPU ids to pin workers to: one per physical core, restricted to the
/// process affinity mask. Empty when the topology cannot be read.
pub fn pin_targets() -> Vec<usize> {
    #[cfg(target_os = "linux")]
    {
        linux::one_cpu_per_core()
    }
    #[cfg(not(target_os = "linux"))]
    {
        Vec::new()
    }
}

/// Pins the calling thread to a logical CPU. Returns false when unsupported or refused.
pub fn pin_current_thread(cpu: usize) -> bool {
    #[cfg(target_os = "linux")]
    {
        linux::pin(cpu)
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = cpu;
        false
    }
}

#[cfg(target_os = "linux")]
mod linux {
    use super::BTreeSet;
    use std::fs;

    fn allowed_cpus() -> Option<Vec<usize>> {
        // SAFETY: cpu_set_t is plain data; sched_getaffinity fills it.
        unsafe {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
                return None;
            }
            Some((0..libc::CPU_SETSIZE as usize).filter(|&c| libc::CPU_ISSET(c, &set)).collect())
        }
    }

    fn read_id(cpu: usize, file: &str) -> Option<i64> {
        let path = format!("/sys/devices/system/cpu/cpu{cpu}/topology/{file}");
        fs::read_to_string(path).ok()?.trim().parse().ok()
    }

    pub(super) fn one_cpu_per_core() -> Vec<usize> {
        let Some(cpus) = allowed_cpus() else { return Vec::new() };
        let mut seen = BTreeSet::new();
        let mut targets = Vec::new();
        for cpu in cpus {
            let package = read_id(cpu, "physical_package_id").unwrap_or(0);
            let core = read_id(cpu, "core_id").unwrap_or(cpu as i64);
            if seen.insert((package, core)) {
                targets.push(cpu);
            }
        }
        targets
    }

    pub(super) fn pin(cpu: usize) -> bool {
        // SAFETY: as above; pid 0 targets the calling thread.
        unsafe {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(cpu, &mut set);
            libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
        }
    }
}
