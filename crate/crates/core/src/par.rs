//! Data-parallel primitives with a sequential fallback.
//!
//! With the `parallel` feature (default) these run on the current rayon
//! pool; without it they are plain iterator loops. Every helper produces the
//! same result regardless of how the work is scheduled: collections keep
//! index order, searches return the lowest matching index, and reductions
//! must be given an associative, commutative combiner.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and collects in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Lowest `i in 0..n` for which `f(i)` returns `Some`, with its payload.
pub fn find_map_first<T, F>(n: usize, f: F) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> Option<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().find_map_first(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).find_map(f)
    }
}

/// Maps every index and folds the results with `combine`.
pub fn map_reduce<T, F, C>(n: usize, identity: T, map: F, combine: C) -> T
where
    T: Send + Sync + Clone,
    F: Fn(usize) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(map)
            .reduce(|| identity.clone(), combine)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(map).fold(identity, combine)
    }
}

/// Number of worker threads the helpers above will use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
