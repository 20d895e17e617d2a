use rayon::prelude::*;

use dpboot_core::TaskRunner;

use crate::error::{CliError, Result};

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "DPBOOT_THREADS";

/// Runs tasks on a dedicated rayon pool.
pub struct RayonRunner {
    pool: rayon::ThreadPool,
}

impl RayonRunner {
    /// `threads` wins over `DPBOOT_THREADS`; with neither, every core is used.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let threads = match threads {
            Some(t) => t,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count")))?,
                Err(_) => 0,
            },
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
        Ok(RayonRunner { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TaskRunner for RayonRunner {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        self.pool.install(|| (0..tasks).into_par_iter().map(&f).collect())
    }
}
