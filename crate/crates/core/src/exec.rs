//! Data-parallel helpers.
//!
//! Every batch operation in the crate (per-sample fusion, sweep rows,
//! pairwise divergences, synthetic generation) funnels through
//! [`map_indexed`], so the parallel and sequential paths produce
//! identical, input-ordered results. With the `parallel` feature disabled
//! [`Execution::Parallel`] silently falls back to the sequential loop.

/// How a batch of independent work items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this mode actually runs on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to `0..n` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, exec, f).into_iter().collect()
}
