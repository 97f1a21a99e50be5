//! Deterministic sharded execution.
//!
//! Work is split into a fixed number of shards independent of the worker
//! count; shard results are combined in shard order, so reductions are
//! bit-reproducible no matter how many threads run. The worker count is capped
//! by the `RF_CURVATURE_THREADS` environment variable (0 or unset = auto).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

/// Worker-thread cap from `RF_CURVATURE_THREADS` (0 or unset = all cores).
pub fn max_threads() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        let auto = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        match std::env::var("RF_CURVATURE_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            Some(0) | None => auto,
            Some(n) => n.min(auto).max(1),
        }
    })
}

/// Runs `worker(shard_index)` for every shard and returns results in shard order.
///
/// The shard count, not the thread count, determines the work split, so the
/// output is identical whether this runs on one thread or many.
pub fn run_sharded<T, F>(num_shards: usize, worker: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = max_threads().min(num_shards.max(1));
    if threads <= 1 || num_shards <= 1 {
        return (0..num_shards).map(worker).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..num_shards).map(|_| None).collect();
    let slot_ptr = SlotsPtr(slots.as_mut_ptr());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            let next = &next;
            let worker = &worker;
            let slot_ptr = &slot_ptr;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= num_shards {
                    break;
                }
                let value = worker(i);
                // Each shard index is claimed exactly once, so the write
                // targets a distinct slot.
                unsafe { *slot_ptr.0.add(i) = Some(value) };
            });
        }
    });
    slots.into_iter().map(|s| s.expect("shard completed")).collect()
}

struct SlotsPtr<T>(*mut Option<T>);
unsafe impl<T: Send> Sync for SlotsPtr<T> {}
