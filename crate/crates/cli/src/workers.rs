//! Worker-count resolution and a bounded parallel map for independent
//! per-session jobs.

use uercm_core::error::{Error, Result};

pub const WORKERS_ENV: &str = "UERCM_WORKERS";

/// Worker count from `UERCM_WORKERS`, defaulting to the machine's
/// available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
            if n == 0 {
                return Err(Error::Config(format!("{WORKERS_ENV} must be at least 1")));
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Run `job` over `0..n` on up to `workers` threads and return results in
/// index order. Jobs must be independent; the first error wins.
pub fn parallel_map<T, F>(n: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if n == 0 {
        return Ok(Vec::new());
    }
    let workers = workers.min(n).max(1);
    if workers == 1 {
        return (0..n).map(&job).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    let slot_refs: Vec<std::sync::Mutex<&mut Option<Result<T>>>> =
        slots.iter_mut().map(std::sync::Mutex::new).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = job(i);
                **slot_refs[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every index visited"))
        .collect()
}
