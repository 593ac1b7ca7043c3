//! Order-preserving map over independent jobs.
//!
//! With the `parallel` feature the work is spread over a rayon pool;
//! without it the same closures run sequentially. Results come back in input
//! order either way, and every job is a pure function of its input, so both
//! builds produce bit-identical output.

/// Environment variable holding the worker count (1 = fully serial).
pub const WORKERS_ENV: &str = "QTHERM_WORKERS";

/// Worker count requested through [`WORKERS_ENV`], if any.
pub fn requested_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Sizes the global pool. Only the first call has an effect.
#[cfg(feature = "parallel")]
pub fn configure_workers(n: Option<usize>) {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n);
    }
    // an already-initialized pool is fine
    let _ = builder.build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn configure_workers(_n: Option<usize>) {}

pub fn current_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Fallible [`map`]; the first error in input order is returned.
pub fn try_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

/// Sequential reference used by benches and equivalence tests.
pub fn map_serial<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
