//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the current
//! rayon pool. Every caller reduces with exact integer arithmetic or
//! collects into index order, so the thread count never changes a result.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and returns the results in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Maps `f` over `0..n` and folds the results with `merge`.
///
/// `merge` must be associative and commutative (integer sums, maxima) for
/// the result to be independent of scheduling.
pub fn map_reduce<R, F, I, M>(n: usize, identity: I, f: F, merge: M) -> R
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
    I: Fn() -> R + Sync + Send,
    M: Fn(R, R) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce(identity, merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(identity(), merge)
    }
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Whether this build spreads work over rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
