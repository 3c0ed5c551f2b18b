//! Thread-pool execution of the free-solution phase.

use dynsub_core::partitioned::{FreePhase, FreeSolution, Sequential};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Environment variable holding the free-phase thread count. Unset or `1`
/// runs sequentially; `0` uses one thread per core.
pub const THREADS_ENV: &str = "DYNSUB_THREADS";

/// Runs the per-substructure free steps on a dedicated rayon pool. Results
/// are returned in substructure order, so output does not depend on
/// scheduling.
pub struct RayonPhase {
    pool: ThreadPool,
}

impl RayonPhase {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Format(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl FreePhase for RayonPhase {
    fn map(&self, count: usize, task: &(dyn Fn(usize) -> FreeSolution + Sync)) -> Vec<FreeSolution> {
        self.pool
            .install(|| (0..count).into_par_iter().map(task).collect())
    }
}

pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("{THREADS_ENV} must be a thread count, got '{v}'"))),
    }
}

/// Executor selected by [`THREADS_ENV`].
pub fn executor_from_env() -> Result<Box<dyn FreePhase>> {
    Ok(match threads_from_env()? {
        1 => Box::new(Sequential),
        n => Box::new(RayonPhase::new(n)?),
    })
}
