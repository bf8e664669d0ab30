//! Rayon-backed replica executor.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use rwrs_core::Executor;

use crate::error::{usage, Result};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "RWRS_THREADS";

/// Runs replicas on a private thread pool. Results come back in replica
/// order, so output does not depend on the number of workers.
pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(usage("thread count must be at least 1"));
        }
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Parallel { pool })
    }

    /// Uses `RWRS_THREADS` if set, otherwise every available core.
    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_VAR) {
            Ok(v) => {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
                Self::new(n)
            }
            Err(std::env::VarError::NotPresent) => {
                Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
            }
            Err(e) => Err(usage(format!("{THREADS_VAR}: {e}"))),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}
