//! Parallel execution helpers with a sequential fallback.
//!
//! Every parallel site in the crate maps an ordered list of independent
//! work items and collects results back in input order; reductions over
//! those results are always performed sequentially by the caller. This
//! keeps floating-point accumulation order fixed, so results are
//! bit-identical regardless of thread count or the `parallel` feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
pub fn map_collect<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Maps `f` over `items` with a per-worker scratch value built by `init`,
/// preserving order. Scratch state must not leak into results beyond what
/// `f` fully overwrites.
pub fn map_with_scratch<S, I, O, FI, F>(items: Vec<I>, init: FI, f: F) -> Vec<O>
where
    S: Send,
    I: Send,
    O: Send,
    FI: Fn() -> S + Sync + Send,
    F: Fn(&mut S, I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map_init(&init, |s, item| f(s, item)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = init();
        items.into_iter().map(|item| f(&mut scratch, item)).collect()
    }
}

/// Number of worker threads the crate will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
