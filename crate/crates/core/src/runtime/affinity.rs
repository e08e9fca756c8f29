//! Thread pinning through the host affinity call.

#[cfg(target_os = "linux")]
pub fn pin_current_thread(core: usize) -> bool {
    // SAFETY: cpu_set_t is plain data; the set is initialized before use
    // and only the calling thread is affected.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if core >= libc::CPU_SETSIZE as usize {
            return false;
        }
        libc::CPU_SET(core, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread(_core: usize) -> bool {
    false
}

pub fn physical_cores() -> usize {
    let logical = std::thread::available_parallelism().map_or(1, |n| n.get());
    #[cfg(target_os = "linux")]
    if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
        let mut pairs = std::collections::BTreeSet::new();
        let (mut phys, mut core) = (None, None);
        for line in info.lines().chain(std::iter::once("")) {
            let mut kv = line.splitn(2, ':').map(str::trim);
            match (kv.next(), kv.next()) {
                (Some("physical id"), Some(v)) => phys = Some(v.to_string()),
                (Some("core id"), Some(v)) => core = Some(v.to_string()),
                (Some(""), None) => {
                    if let (Some(p), Some(c)) = (phys.take(), core.take()) {
                        pairs.insert((p, c));
                    }
                }
                _ => {}
            }
        }
        if !pairs.is_empty() {
            return pairs.len().min(logical);
        }
    }
    logical
}
