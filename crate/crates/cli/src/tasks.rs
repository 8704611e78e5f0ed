//! Deterministic task execution.
//!
//! A command's work is a fixed list of tasks (grid cells, fuzz instances,
//! sweep chunks). Each task derives its own RNG stream from the base seed by
//! task counter, results are collected in task order, and the worker count —
//! capped by `HETDIM_THREADS` — never influences the output bytes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream-separated RNG for one task: same base seed, disjoint stream.
pub fn rng_for(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

/// Worker count: `HETDIM_THREADS` when set to a positive integer, otherwise
/// the machine's available parallelism, never more than `tasks`.
pub fn worker_count(tasks: usize) -> usize {
    let cap = std::env::var("HETDIM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    cap.min(tasks.max(1))
}

/// Runs `f(i)` for every `i < tasks` and returns the results in task order,
/// regardless of how the scheduler interleaves the workers.
pub fn run_tasks<T, F>(tasks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = worker_count(tasks);
    if workers <= 1 {
        return (0..tasks).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..tasks).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= tasks {
                    break;
                }
                let value = f(i);
                *slots[i].lock().expect("result slot poisoned") = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("every task ran")
        })
        .collect()
}
