//! Deterministic data-parallel helpers.
//!
//! All reductions use a fixed chunk size and combine per-chunk partial sums
//! in chunk-index order, so results are bitwise identical for any worker
//! count and identical to the sequential fallback built with
//! `--no-default-features`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed reduction granularity. Must not depend on thread count.
pub const CHUNK: usize = 8192;

/// Sum `f(chunk)` over fixed-size chunks of `data`, combining in index order.
pub fn chunked_sum<T, F>(data: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&[T]) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    {
        let partials: Vec<f64> = data.par_chunks(CHUNK).map(|c| f(c)).collect();
        partials.iter().sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks(CHUNK).map(|c| f(c)).sum()
    }
}

/// Sum a function of paired chunks of two equal-length slices.
pub fn chunked_sum2<A, B, F>(a: &[A], b: &[B], f: F) -> f64
where
    A: Sync,
    B: Sync,
    F: Fn(&[A], &[B]) -> f64 + Sync,
{
    chunked_sum2_offset(a, b, |_, ca, cb| f(ca, cb))
}

/// Like [`chunked_sum2`], passing the chunk's base index as well.
pub fn chunked_sum2_offset<A, B, F>(a: &[A], b: &[B], f: F) -> f64
where
    A: Sync,
    B: Sync,
    F: Fn(usize, &[A], &[B]) -> f64 + Sync,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    {
        let partials: Vec<f64> = a
            .par_chunks(CHUNK)
            .zip(b.par_chunks(CHUNK))
            .enumerate()
            .map(|(i, (ca, cb))| f(i * CHUNK, ca, cb))
            .collect();
        partials.iter().sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.chunks(CHUNK)
            .zip(b.chunks(CHUNK))
            .enumerate()
            .map(|(i, (ca, cb))| f(i * CHUNK, ca, cb))
            .sum()
    }
}

/// Apply `f` to fixed-size chunks of `data`, passing the chunk's base index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    for_each_aligned_chunk_mut(data, 1, f);
}

/// Like [`for_each_chunk_mut`] but chunk boundaries are multiples of `align`
/// (FFT lines, z-slabs). Chunks are at least `align` long.
pub fn for_each_aligned_chunk_mut<T, F>(data: &mut [T], align: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    let size = align * (CHUNK / align).max(1);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(size)
            .enumerate()
            .for_each(|(i, c)| f(i * size, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(size)
            .enumerate()
            .for_each(|(i, c)| f(i * size, c));
    }
}

/// Map `0..n` to values, preserving index order.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
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
        (0..n).map(f).collect()
    }
}
