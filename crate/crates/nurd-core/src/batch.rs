//! Sweep helpers for running many independent (job, mode, seed) work items.
//!
//! With the default `parallel` feature the items fan out over a rayon pool;
//! without it, or with `workers == 1`, the same closure runs sequentially.
//! Output order always matches input order, so callers can sort and write
//! deterministic reports regardless of worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items` with up to `workers` threads (0 = all cores).
pub fn map_items<I, T, F>(items: &[I], workers: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers != 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers) // rayon treats 0 as "number of cores"
                .build();
            if let Ok(pool) = pool {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    map_items_seq(items, f)
}

/// Sequential twin of [`map_items`]; always available, used as the baseline
/// in benchmarks.
pub fn map_items_seq<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    F: Fn(&I) -> T,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let items: Vec<u64> = (0..200).collect();
        let f = |x: &u64| x * x + 1;
        let seq = map_items_seq(&items, f);
        for workers in [0, 1, 2, 4] {
            let par = map_items(&items, workers, f);
            assert_eq!(par, seq, "workers = {workers}");
        }
    }
}
