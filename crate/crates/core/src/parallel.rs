//! Deterministic data-parallel reductions.
//!
//! Sums are split into fixed-size chunks, each chunk is reduced sequentially
//! and the chunk partials are added in index order. The result therefore does
//! not depend on the number of worker threads.

use rayon::prelude::*;

/// Chunk length used by every reduction in the crate.
pub const CHUNK: usize = 4096;

/// `Σ f(i)` for `i in 0..n`, bit-reproducible across thread counts.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        })
        .collect();
    partials.iter().sum()
}

/// Dot product with the chunked reduction order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_by(a.len(), |i| a[i] * b[i])
}
