//! Order-preserving map over an index range, data-parallel when the
//! `parallel` feature is enabled and sequential otherwise.
//!
//! Results always come back in index order, so any reduction performed by
//! the caller is independent of the worker count.

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// Rayon pool with the given number of workers; `0` means the rayon default.
    /// Falls back to sequential execution without the `parallel` feature.
    Parallel { threads: usize },
}

impl Execution {
    pub fn with_threads(threads: usize) -> Self {
        if threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { threads }
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Execution::Parallel { .. })
    }
}

pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel { threads } => {
            use rayon::prelude::*;
            let run = || (0..n).into_par_iter().map(&f).collect();
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(run),
                Err(err) => {
                    log::warn!("could not build a {threads}-thread pool ({err}); using the global pool");
                    run()
                }
            }
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Like [`map_indexed`], reporting the lowest-index error if any item fails.
pub fn try_map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, exec, f).into_iter().collect()
}
