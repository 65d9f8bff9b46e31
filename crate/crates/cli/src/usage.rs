//! Process resource usage.

use std::time::Duration;

pub struct Usage {
    /// User plus system CPU time.
    pub cpu: Duration,
    /// Peak resident set size.
    pub peak_bytes: u64,
}

fn timeval(tv: libc::timeval) -> Duration {
    Duration::from_secs(tv.tv_sec as u64) + Duration::from_micros(tv.tv_usec as u64)
}

pub fn current() -> Usage {
    // SAFETY: getrusage only writes into the zeroed struct we hand it.
    let ru = unsafe {
        let mut ru: libc::rusage = std::mem::zeroed();
        if libc::getrusage(libc::RUSAGE_SELF, &mut ru) != 0 {
            return Usage {
                cpu: Duration::ZERO,
                peak_bytes: 0,
            };
        }
        ru
    };
    // Linux reports kilobytes, macOS bytes.
    let scale = if cfg!(target_os = "macos") { 1 } else { 1024 };
    Usage {
        cpu: timeval(ru.ru_utime) + timeval(ru.ru_stime),
        peak_bytes: ru.ru_maxrss.max(0) as u64 * scale,
    }
}
