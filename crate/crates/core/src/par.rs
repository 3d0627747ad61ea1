//! Index-parallel map used for replications and cross-validation folds.
//!
//! Results always come back in index order, so reductions over them do not
//! depend on scheduling. Without the `parallel` feature everything runs on
//! the calling thread.

/// Runs `f(0..n)` with at most `jobs` worker threads (`0` = all cores).
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if jobs == 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    if rayon::current_thread_index().is_some() {
        // already on a worker: share the enclosing pool
        return (0..n).into_par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
