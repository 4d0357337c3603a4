//! Regular-domain diagnostic: volume density of the complement near the
//! boundary.

use rayon::prelude::*;

use super::grid::SetMask;
use crate::{Error, Result};

/// Outcome of [`regularity_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    /// Minimum complement volume fraction found.
    pub min_density: f64,
    /// Centre of the boundary cell attaining the minimum.
    pub worst_point: [f64; 3],
    /// Ball radius attaining the minimum.
    pub worst_radius: f64,
    /// Number of boundary cells examined.
    pub boundary_cells: usize,
}

impl RegularityReport {
    /// A set is reported `b`-regular at the probed scales iff `min_density >= b`.
    pub fn is_regular(&self, b: f64) -> bool {
        self.min_density >= b
    }
}

/// Minimum over boundary cells `z` of `D` and radii `r in {h, 2h, ..., r0}` of
/// `|B(z, r) \ D| / |B(z, r)|`, with both volumes counted in cell centres.
/// Positions outside the grid count as complement.
pub fn regularity_density(d: &SetMask, r0: f64) -> Result<RegularityReport> {
    let grid = *d.grid();
    let h = grid.spacing();
    if r0 < h {
        return Err(Error::RadiusTooSmall { r0, h });
    }
    if d.is_empty() {
        return Err(Error::EmptySet);
    }
    if d.count() == grid.n_cells() {
        return Err(Error::InvalidArgument("complement of the domain is empty within the grid".into()));
    }
    let m_max = (r0 / h + 1e-9).floor() as i64;
    let dim = grid.dim();

    // Integer offsets within the largest ball, sorted by squared length.
    let mut offsets: Vec<([i64; 3], i64)> = Vec::new();
    let zr = if dim == 3 { m_max } else { 0 };
    for k in -zr..=zr {
        for j in -m_max..=m_max {
            for i in -m_max..=m_max {
                let s = i * i + j * j + k * k;
                if s <= m_max * m_max {
                    offsets.push(([i, j, k], s));
                }
            }
        }
    }
    offsets.sort_by_key(|&(o, s)| (s, o));

    let boundary = d.boundary_cells();
    let dims = grid.dims();
    let best = boundary
        .par_iter()
        .map(|&z| {
            let c = grid.coords(z);
            let mut total = 0usize;
            let mut outside = 0usize;
            let mut best = (f64::INFINITY, 0i64);
            let mut next_m = 1i64;
            for &(o, s) in &offsets {
                while next_m <= m_max && s > next_m * next_m {
                    let frac = outside as f64 / total as f64;
                    if frac < best.0 {
                        best = (frac, next_m);
                    }
                    next_m += 1;
                }
                total += 1;
                let mut q = [0usize; 3];
                let mut inside_grid = true;
                for a in 0..dim {
                    let t = c[a] as i64 + o[a];
                    if t < 0 || t >= dims[a] as i64 {
                        inside_grid = false;
                        break;
                    }
                    q[a] = t as usize;
                }
                if !inside_grid || !d.get(grid.index(q)) {
                    outside += 1;
                }
            }
            while next_m <= m_max {
                let frac = outside as f64 / total as f64;
                if frac < best.0 {
                    best = (frac, next_m);
                }
                next_m += 1;
            }
            (best.0, best.1, z)
        })
        .reduce(
            || (f64::INFINITY, 0, usize::MAX),
            |a, b| if (b.0, b.2) < (a.0, a.2) { b } else { a },
        );
    Ok(RegularityReport {
        min_density: best.0,
        worst_point: grid.center(best.2),
        worst_radius: best.1 as f64 * h,
        boundary_cells: boundary.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::{EulerianGrid, MaskKind};
    use crate::geometry::shapes;

    #[test]
    fn half_space_density_is_about_one_half() {
        let h = 1.0 / 64.0;
        let g = EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], h).unwrap();
        let d = shapes::half_space(g, MaskKind::Open, 0, 0.0);
        let r0 = 16.0 * h;
        let rep = regularity_density(&d, r0).unwrap();
        // Boundary cells sit half a cell inside, so the deficit is O(h / r).
        assert!(rep.min_density <= 0.5);
        assert!(rep.min_density >= 0.5 - 1.5 * h / rep.worst_radius - 1e-12, "{rep:?}");
    }

    #[test]
    fn disk_exterior_density_at_least_half_minus_slack() {
        let h = 1.0 / 64.0;
        let g = EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], h).unwrap();
        let d = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], 0.5);
        let rep = regularity_density(&d, 8.0 * h).unwrap();
        assert!(rep.min_density >= 0.5 - 2.0 * h / rep.worst_radius, "{rep:?}");
    }

    #[test]
    fn interior_slit_destroys_regularity() {
        let h = 1.0 / 64.0;
        let g = EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], h).unwrap();
        let mut d = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], 0.8);
        // Remove a one-cell-wide horizontal slit through the centre.
        let (j0, _) = g.cell_range(1, -0.5 * h, 0.5 * h);
        for i in 0..g.dims()[0] {
            let idx = g.index([i, j0, 0]);
            if g.center(idx)[0] < 0.4 {
                d.set(idx, false);
            }
        }
        let small = regularity_density(&d, 2.0 * h).unwrap().min_density;
        let large = regularity_density(&d, 16.0 * h).unwrap().min_density;
        assert!(large < small);
        assert!(large < 0.1, "slit density {large}");
    }

    #[test]
    fn radius_below_spacing_is_rejected() {
        let g = EulerianGrid::new(2, &[0.0, 0.0], 0.1, &[10, 10]).unwrap();
        let d = shapes::ball(g, MaskKind::Open, &[0.5, 0.5], 0.3);
        assert!(matches!(regularity_density(&d, 0.05), Err(Error::RadiusTooSmall { .. })));
    }
}
