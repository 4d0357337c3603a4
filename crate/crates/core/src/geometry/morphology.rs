//! Outer and inner approximations of sets by distance sublevel sets.

use super::edt::squared_cell_distances;
use super::grid::{MaskKind, SetMask};
use crate::{Error, Result};

/// `{x : dist(x, K) <= eps}`: the closed outer approximation of a compact set.
///
/// Fails with [`Error::BoundaryClipped`] if the result reaches the outermost
/// grid layer, since the true thickening would then extend past the grid.
pub fn thicken(k: &SetMask, eps: f64) -> Result<SetMask> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("thickening radius must be >= 0, got {eps}")));
    }
    if k.is_empty() {
        return Err(Error::EmptySet);
    }
    let grid = *k.grid();
    let sq = squared_cell_distances(&grid, k.cells());
    let h = grid.spacing();
    let cells: Vec<bool> = sq.iter().map(|&s| s.sqrt() * h <= eps).collect();
    let out = SetMask::from_cells(grid, MaskKind::Compact, cells)?;
    if out.touches_outer_layer() {
        return Err(Error::BoundaryClipped);
    }
    Ok(out)
}

/// `{x in A : dist(x, complement of A) > eps}`: the open inner approximation.
///
/// The complement is taken inside the grid box. An empty result is returned
/// as an empty open mask.
pub fn thin(a: &SetMask, eps: f64) -> Result<SetMask> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("thinning radius must be > 0, got {eps}")));
    }
    let grid = *a.grid();
    let outside: Vec<bool> = a.cells().iter().map(|&c| !c).collect();
    let sq = squared_cell_distances(&grid, &outside);
    let h = grid.spacing();
    let cells = a.cells().iter().zip(&sq).map(|(&c, &s)| c && s.sqrt() * h > eps).collect();
    SetMask::from_cells(grid, MaskKind::Open, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::grid::EulerianGrid;
    use crate::geometry::shapes;

    fn grid(h: f64) -> EulerianGrid {
        EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], h).unwrap()
    }

    /// Hausdorff-type check: every cell of `m` lies within `r + tol` of the
    /// origin and every cell with centre inside `r - tol` belongs to `m`.
    fn is_disk_within(m: &SetMask, r: f64, tol: f64) -> bool {
        let g = m.grid();
        (0..g.n_cells()).all(|i| {
            let p = g.center(i);
            let rho = p[0].hypot(p[1]);
            if m.get(i) {
                rho <= r + tol
            } else {
                rho >= r - tol
            }
        })
    }

    #[test]
    fn zero_thickening_is_identity() {
        let g = grid(1.0 / 32.0);
        let k = shapes::ball(g, MaskKind::Compact, &[0.0, 0.0], 0.3);
        assert_eq!(thicken(&k, 0.0).unwrap(), k);
    }

    #[test]
    fn thickened_disk_is_a_larger_disk() {
        let h = 1.0 / 64.0;
        let g = grid(h);
        let k = shapes::ball(g, MaskKind::Compact, &[0.0, 0.0], 0.3);
        let t = thicken(&k, 0.2).unwrap();
        assert!(is_disk_within(&t, 0.5, h));
        assert!(k.is_subset_of(&t).unwrap());
    }

    #[test]
    fn thickening_is_nested() {
        let g = grid(1.0 / 32.0);
        let k = shapes::ball(g, MaskKind::Compact, &[0.1, 0.0], 0.2);
        let mut prev = thicken(&k, 0.0).unwrap();
        for eps in [0.03, 0.05, 0.11, 0.2, 0.4] {
            let next = thicken(&k, eps).unwrap();
            assert!(prev.is_subset_of(&next).unwrap());
            prev = next;
        }
    }

    #[test]
    fn thickening_past_the_grid_is_clipped() {
        let g = grid(1.0 / 16.0);
        let k = shapes::ball(g, MaskKind::Compact, &[0.0, 0.0], 0.5);
        assert!(matches!(thicken(&k, 0.6), Err(Error::BoundaryClipped)));
    }

    #[test]
    fn small_thinning_keeps_interior() {
        let h = 1.0 / 32.0;
        let g = grid(h);
        let a = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], 0.6);
        assert_eq!(thin(&a, 0.49 * h).unwrap(), a);
    }

    #[test]
    fn thinned_disk_is_a_smaller_disk() {
        let h = 1.0 / 64.0;
        let g = grid(h);
        let a = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], 0.7);
        let t = thin(&a, 0.25).unwrap();
        assert!(is_disk_within(&t, 0.45, h));
        assert!(t.is_subset_of(&a).unwrap());
    }

    #[test]
    fn thinning_is_nested_and_may_be_empty() {
        let g = grid(1.0 / 32.0);
        let a = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], 0.5);
        let t1 = thin(&a, 0.1).unwrap();
        let t2 = thin(&a, 0.3).unwrap();
        assert!(t2.is_subset_of(&t1).unwrap());
        assert!(thin(&a, 0.9).unwrap().is_empty());
    }

    #[test]
    fn opening_and_closing_sandwich() {
        let h = 1.0 / 32.0;
        let g = grid(h);
        let a = shapes::ball(g, MaskKind::Open, &[0.05, -0.1], 0.45)
            .union(&shapes::ball(g, MaskKind::Open, &[0.3, 0.2], 0.3))
            .unwrap();
        let eps = 3.0 * h;
        let reopened = thicken(&thin(&a, eps).unwrap(), eps).unwrap();
        assert!(reopened.is_subset_of(&a).unwrap());
        let closed = thin(&thicken(&a.clone().with_kind(MaskKind::Compact), eps).unwrap(), eps).unwrap();
        assert!(a.is_subset_of(&closed).unwrap());
    }
}
