//! Data-parallel map helpers. With the `parallel` feature (default) the maps
//! run on rayon; without it they fall back to sequential iteration. The
//! `*_seq` variants always run sequentially and back the benchmark suite.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Caps the global worker pool (first call wins). No-op without the
/// `parallel` feature.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: Option<usize>) {
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: Option<usize>) {}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
