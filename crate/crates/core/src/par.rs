//! Data-parallel execution of independent work items.
//!
//! Experiment cells, Monte Carlo trials and property sweeps are embarrassingly
//! parallel; with the default `parallel` feature they run on a rayon pool
//! (capped by the `CONSENSUS_JL_THREADS` environment variable), without it
//! everything degrades to a plain sequential map with identical results.

/// Sequential reference implementation, always available.
pub fn map_sequential<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
///
/// Output order matches input order regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn map_items<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match thread_cap() {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("rayon pool");
            pool.install(|| items.into_par_iter().map(f).collect())
        }
        None => items.into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_items<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    map_sequential(items, f)
}

#[cfg(feature = "parallel")]
fn thread_cap() -> Option<usize> {
    std::env::var("CONSENSUS_JL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
}
