use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use spinwire_core::ensemble::{Executor, RealizationRecord};
use spinwire_core::{Error, Result};

/// Runs realizations on a dedicated rayon pool. Records come back in index
/// order, so aggregation does not depend on the number of threads.
pub struct ParallelExecutor {
    pool: ThreadPool,
}

impl ParallelExecutor {
    /// `None` or `Some(0)` uses one thread per core.
    pub fn new(threads: Option<usize>) -> std::result::Result<Self, rayon::ThreadPoolBuildError> {
        let mut builder = ThreadPoolBuilder::new();
        if let Some(n) = threads.filter(|&n| n > 0) {
            builder = builder.num_threads(n);
        }
        Ok(Self {
            pool: builder.build()?,
        })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for ParallelExecutor {
    fn run(
        &self,
        count: usize,
        task: &(dyn Fn(usize) -> Result<RealizationRecord> + Sync),
    ) -> Result<Vec<RealizationRecord>> {
        let results: Vec<Result<RealizationRecord>> = self
            .pool
            .install(|| (0..count).into_par_iter().map(task).collect());
        let completed = results.iter().filter(|r| r.is_ok()).count();
        let mut records = Vec::with_capacity(count);
        for r in results {
            match r {
                Ok(record) => records.push(record),
                Err(source) => {
                    return Err(Error::EnsembleAborted {
                        completed,
                        source: Box::new(source),
                    })
                }
            }
        }
        Ok(records)
    }
}
