//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb and
//! Huttenlocher). Squared distances are carried in cell units, where every
//! intermediate value is an integer represented exactly in `f64`, so the result
//! equals brute-force nearest-centre search bit for bit.

use rayon::prelude::*;

use super::grid::{DistanceField, EulerianGrid, SetMask};
use crate::{Error, Result};

/// Distance from every cell centre to the nearest occupied cell centre.
pub fn distance_transform(mask: &SetMask) -> Result<DistanceField> {
    if mask.is_empty() {
        return Err(Error::EmptySet);
    }
    let grid = *mask.grid();
    let sq = squared_cell_distances(&grid, mask.cells());
    let h = grid.spacing();
    DistanceField::new(grid, sq.into_iter().map(|s| s.sqrt() * h).collect())
}

/// Squared distances in units of cells to the nearest `true` cell; `f64::INFINITY`
/// everywhere when there is none.
pub fn squared_cell_distances(grid: &EulerianGrid, seeds: &[bool]) -> Vec<f64> {
    let mut f: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    for axis in 0..grid.dim() {
        transform_axis(grid, &mut f, axis);
    }
    f
}

fn transform_axis(grid: &EulerianGrid, f: &mut [f64], axis: usize) {
    let dims = [grid.dims()[0], grid.dims()[1], if grid.dim() == 3 { grid.dims()[2] } else { 1 }];
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    // Line starts: all cells whose coordinate along `axis` is zero.
    let starts: Vec<usize> = (0..f.len()).filter(|&i| (i / stride) % n == 0).collect();
    let src: &[f64] = f;
    let lines: Vec<Vec<f64>> = starts
        .par_iter()
        .map_init(
            || (vec![0.0; n], vec![0usize; n], vec![0.0; n + 1]),
            |(buf, v, z), &s| {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = src[s + k * stride];
                }
                let mut out = vec![0.0; n];
                lower_envelope(buf, &mut out, v, z);
                out
            },
        )
        .collect();
    for (&s, line) in starts.iter().zip(lines) {
        for (k, val) in line.into_iter().enumerate() {
            f[s + k * stride] = val;
        }
    }
}

/// One-dimensional squared distance transform of the sampled function `f`.
fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, out) in d.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}
