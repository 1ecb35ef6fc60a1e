//! Ordered batch map, data-parallel with the `parallel` feature and
//! sequential otherwise. Results always come back in batch order, so any
//! fold over them is independent of the worker count.

use std::ops::Range;

use crate::error::{Error, Result};

/// Splits `0..n_items` into consecutive batches of `batch` items.
pub fn batches(n_items: u64, batch: u64) -> Vec<Range<u64>> {
    let batch = batch.max(1);
    (0..n_items.div_ceil(batch))
        .map(|b| b * batch..((b + 1) * batch).min(n_items))
        .collect()
}

/// Whether this build runs batches on a thread pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Applies `f` to every batch and returns the results in batch order.
/// `workers` of `None` uses the default pool; `Some(k)` a pool of `k`
/// threads. Sequential builds ignore `workers`.
pub fn map_batches<T, F>(ranges: &[Range<u64>], workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    if workers == Some(0) {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    imp::map(ranges, workers, f)
}

/// Sequential version of [`map_batches`], available in every build.
pub fn map_batches_sequential<T, F>(ranges: &[Range<u64>], f: F) -> Vec<T>
where
    F: Fn(Range<u64>) -> T,
{
    ranges.iter().cloned().map(f).collect()
}

#[cfg(feature = "parallel")]
mod imp {
    use super::*;
    use rayon::prelude::*;

    pub(super) fn map<T, F>(ranges: &[Range<u64>], workers: Option<usize>, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send,
    {
        let run = || ranges.par_iter().cloned().map(&f).collect();
        match workers {
            None => Ok(run()),
            Some(k) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {k} workers: {e}")))?;
                Ok(pool.install(run))
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use super::*;

    pub(super) fn map<T, F>(ranges: &[Range<u64>], _workers: Option<usize>, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send,
    {
        Ok(map_batches_sequential(ranges, f))
    }
}
