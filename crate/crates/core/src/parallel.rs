//! Worker-count control.
//!
//! Parallel sections run inside a dedicated rayon pool sized by the caller.
//! Every parallel map in the crate is index-ordered and reduces in a fixed
//! order, so the worker count never changes results.

use rayon::ThreadPoolBuilder;

use crate::error::{Error, Result};

/// Runs `f` on a pool of `workers` threads (`0` means one per core).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}
