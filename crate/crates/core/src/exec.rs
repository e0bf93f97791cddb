//! Execution policy for data-parallel loops.
//!
//! Every parallel loop in the crate goes through this module. Work is always
//! split into independent items whose results are collected in index order,
//! so results are bit-identical whether the loop ran on one thread or many.
//! With the `parallel` feature disabled (or [`set_parallel`]`(false)`), the
//! same loops run sequentially.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables parallel execution at runtime.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// True when loops will be dispatched to the rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Configures the worker pool. `threads == 1` switches to the sequential path.
pub fn configure_threads(threads: usize) {
    if threads <= 1 {
        set_parallel(false);
        return;
    }
    set_parallel(true);
    #[cfg(feature = "parallel")]
    {
        // The global pool can only be built once per process; later calls keep
        // the first configuration.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Runs `f(chunk_index, chunk)` over consecutive `chunk_len`-sized chunks.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if is_parallel() && data.len() > chunk_len {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    for (i, c) in data.chunks_mut(chunk_len).enumerate() {
        f(i, c);
    }
}
