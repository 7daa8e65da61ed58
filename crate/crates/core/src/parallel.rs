//! Deterministic fan-out over scoped threads.
//!
//! Work is split into contiguous shares; results always come back in index
//! order, so merging them is independent of thread scheduling.

use std::thread;

use crate::rng::RandomStream;

/// Splits `total` into `parts` nearly equal shares, larger shares first.
pub fn split_counts(total: u64, parts: usize) -> Vec<u64> {
    let parts = parts.max(1) as u64;
    (0..parts)
        .map(|i| total / parts + u64::from(i < total % parts))
        .collect()
}

/// Runs `task(stream_w, share_w)` for workers `w = 0..workers`, each with its
/// own stream `(seed, w)`, and returns the results in worker order.
pub fn map_streams<A, F>(seed: u64, workers: usize, total: u64, task: F) -> Vec<A>
where
    A: Send,
    F: Fn(RandomStream, u64) -> A + Sync,
{
    let shares = split_counts(total, workers);
    if shares.len() == 1 {
        return vec![task(RandomStream::new(seed, 0), shares[0])];
    }
    thread::scope(|scope| {
        let handles: Vec<_> = shares
            .iter()
            .enumerate()
            .map(|(w, &share)| {
                let task = &task;
                scope.spawn(move || task(RandomStream::new(seed, w as u64), share))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Evaluates `task(i)` for `i in 0..count` across `workers` threads and
/// returns the results ordered by `i`.
pub fn map_indexed<A, F>(count: usize, workers: usize, task: F) -> Vec<A>
where
    A: Send,
    F: Fn(usize) -> A + Sync,
{
    let workers = workers.clamp(1, count.max(1));
    if workers == 1 {
        return (0..count).map(task).collect();
    }
    let shares = split_counts(count as u64, workers);
    thread::scope(|scope| {
        let mut start = 0usize;
        let handles: Vec<_> = shares
            .iter()
            .map(|&share| {
                let range = start..start + share as usize;
                start = range.end;
                let task = &task;
                scope.spawn(move || range.map(task).collect::<Vec<_>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
