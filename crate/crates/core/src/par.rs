//! Fork-join helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is chunked over the rayon pool;
//! without it the same chunk structure runs on one thread. Chunk results are
//! always merged in index order, so aggregates are bit-identical regardless
//! of feature or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Size the global worker pool; 0 keeps the library default. A no-op once a
/// pool exists or when the `parallel` feature is off.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential counterpart of [`map_indexed`], always available.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
