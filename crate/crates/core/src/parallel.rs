//! Index-parallel map with a sequential fallback.
//!
//! With the `parallel` feature disabled every mode runs sequentially.
//! Results are always returned in index order, so outputs do not depend on
//! the mode or the thread count.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    Sequential,
    /// Rayon work stealing; `threads: None` uses the global pool.
    #[default]
    Parallel,
    ParallelWith { threads: usize },
}

impl ExecutionMode {
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            Some(1) => Self::Sequential,
            Some(threads) if threads > 1 => Self::ParallelWith { threads },
            _ => Self::Parallel,
        }
    }
}

/// Applies `f` to `0..n` and collects the results in order.
pub fn map_indexed<T, F>(n: usize, mode: ExecutionMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match mode {
            ExecutionMode::Sequential => {}
            ExecutionMode::Parallel => return (0..n).into_par_iter().map(f).collect(),
            ExecutionMode::ParallelWith { threads } => {
                match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                    Ok(pool) => return pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                    Err(_) => return (0..n).into_par_iter().map(f).collect(),
                }
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = mode;
    (0..n).map(f).collect()
}
