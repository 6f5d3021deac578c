//! Job dispatch: every batch stage runs through [`run_jobs`], which maps a
//! function over items either sequentially or on a scoped rayon pool.
//!
//! Output order always matches input order, so results are byte-identical
//! regardless of the job count. With the `parallel` feature disabled the
//! sequential path is the only one compiled.

/// Resolves a job-count setting: `0` means one job per available CPU.
pub fn effective_jobs(jobs: usize) -> usize {
    if jobs == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        jobs
    }
}

/// Maps `f` over `items`, preserving order. `jobs == 1` runs strictly
/// sequentially on the calling thread; any other value uses a rayon pool of
/// `effective_jobs(jobs)` threads. If the pool cannot be built the map falls
/// back to the sequential path.
#[cfg(feature = "parallel")]
pub fn run_jobs<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    use rayon::prelude::*;

    let threads = effective_jobs(jobs);
    if threads == 1 {
        return items.into_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
        Err(_) => items.into_iter().map(f).collect(),
    }
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn run_jobs<T, R, F>(_jobs: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    items.into_iter().map(f).collect()
}
