//! Data-parallel execution of independent work items, with a sequential
//! fallback when the `parallel` feature is disabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool (or the pool installed by [`with_workers`]).
    /// Without the `parallel` feature this runs sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `0..items`, returning results in index order regardless
/// of the execution mode.
pub fn map_indexed<T, F>(exec: Execution, items: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..items).into_par_iter().map(f).collect(),
        _ => (0..items).map(f).collect(),
    }
}

/// Runs `f` with `workers` threads available to [`Execution::Parallel`].
/// `None` keeps the default pool.
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = map_indexed(Execution::Sequential, 100, |i| i * i);
        let b = map_indexed(Execution::Parallel, 100, |i| i * i);
        assert_eq!(a, b);
        let c = with_workers(Some(2), || map_indexed(Execution::Parallel, 100, |i| i * i));
        assert_eq!(a, c);
    }
}
