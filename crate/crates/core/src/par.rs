//! Chunked map with an ordered reduction.
//!
//! Every helper splits its index range into the same chunks whether or not
//! the `parallel` feature is enabled and returns the per-chunk results in
//! chunk order. Callers fold that vector sequentially, which keeps floating
//! point sums bit-identical across thread counts and feature sets.

use std::ops::Range;

/// Applies `f` to consecutive sub-ranges of `range` of length `chunk`
/// (the last one may be shorter). Results come back in range order.
pub fn map_chunks<T, F>(range: Range<u64>, chunk: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    assert!(chunk > 0, "chunk length must be positive");
    if range.start >= range.end {
        return Vec::new();
    }
    let len = range.end - range.start;
    let count = len.div_ceil(chunk);
    let piece = move |j: u64| {
        let lo = range.start + j * chunk;
        let hi = (lo + chunk).min(range.end);
        lo..hi
    };
    map_indices(count, |j| f(piece(j)))
}

/// Applies `f` to `0..count`, returning results in index order.
pub fn map_indices<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Maps over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
