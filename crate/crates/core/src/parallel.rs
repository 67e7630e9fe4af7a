//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the maps below run on the rayon
//! pool; without it they are plain sequential loops. Both paths produce the
//! same output order, and every reduction in the crate goes through
//! [`pairwise_sum`], so results are bit-identical regardless of the number of
//! worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..len`, preserving index order.
pub fn map_indices<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Fallible variant of [`map_indices`]; reports the lowest-index error.
pub fn try_map_indices<R, E, F>(len: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    map_indices(len, f).into_iter().collect()
}

const LEAF: usize = 8;

/// Sums with a fixed binary-tree association so the result does not depend
/// on how the inputs were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Component-wise [`pairwise_sum`] for 3-vectors.
pub fn pairwise_sum_vec3(values: &[crate::Vec3]) -> crate::Vec3 {
    if values.len() <= LEAF {
        return values.iter().fold(crate::Vec3::zeros(), |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum_vec3(&values[..mid]) + pairwise_sum_vec3(&values[mid..])
}

/// Caps the global worker count. A no-op without the `parallel` feature, or
/// when the global pool was already initialized.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Number of workers the maps above will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
