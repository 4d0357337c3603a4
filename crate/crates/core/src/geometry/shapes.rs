//! Rasterization of analytic sets by cell-centre sampling.

use super::grid::{EulerianGrid, MaskKind, SetMask};

/// Ball of radius `r` around `center`. Compact masks use the closed ball, open
/// masks the open one.
pub fn ball(grid: EulerianGrid, kind: MaskKind, center: &[f64], r: f64) -> SetMask {
    let dim = grid.dim();
    let c: Vec<f64> = center.to_vec();
    let r2 = r * r;
    SetMask::from_fn(grid, kind, move |p| {
        let d2: f64 = (0..dim).map(|a| (p[a] - c[a]).powi(2)).sum();
        match kind {
            MaskKind::Compact => d2 <= r2,
            MaskKind::Open => d2 < r2,
        }
    })
}

/// Half-space `{x : x[axis] < offset}` (open) or `<=` (compact).
pub fn half_space(grid: EulerianGrid, kind: MaskKind, axis: usize, offset: f64) -> SetMask {
    SetMask::from_fn(grid, kind, move |p| match kind {
        MaskKind::Compact => p[axis] <= offset,
        MaskKind::Open => p[axis] < offset,
    })
}

/// Filled simple polygon (2D), even-odd rule, by scanline over cell rows.
pub fn polygon(grid: EulerianGrid, kind: MaskKind, vertices: &[[f64; 2]]) -> SetMask {
    assert_eq!(grid.dim(), 2, "polygon rasterization is two-dimensional");
    let mut mask = SetMask::empty(grid, kind);
    let n = vertices.len();
    if n < 3 {
        return mask;
    }
    let (ylo, yhi) = vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[1]), b.max(v[1])));
    let (j0, j1) = grid.cell_range(1, ylo, yhi);
    let mut xs = Vec::new();
    for j in j0..j1 {
        let y = grid.center_of([0, j, 0])[1];
        xs.clear();
        for k in 0..n {
            let a = vertices[k];
            let b = vertices[(k + 1) % n];
            // Half-open rule on y so shared vertices are counted once.
            if (a[1] <= y) != (b[1] <= y) {
                let t = (y - a[1]) / (b[1] - a[1]);
                xs.push(a[0] + t * (b[0] - a[0]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let (i0, i1) = grid.cell_range(0, pair[0], pair[1]);
            for i in i0..i1 {
                let x = grid.center_of([i, j, 0])[0];
                let inside = match kind {
                    MaskKind::Compact => x >= pair[0] && x <= pair[1],
                    MaskKind::Open => x > pair[0] && x < pair[1],
                };
                if inside {
                    mask.set(grid.index([i, j, 0]), true);
                }
            }
        }
    }
    mask
}

/// Area of a simple polygon (shoelace formula, absolute value).
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let a = vertices[k];
            let b = vertices[(k + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_polygon_fills_expected_cells() {
        let g = EulerianGrid::new(2, &[0.0, 0.0], 1.0, &[10, 10]).unwrap();
        let m = polygon(g, MaskKind::Compact, &[[2.0, 2.0], [6.0, 2.0], [6.0, 5.0], [2.0, 5.0]]);
        assert_eq!(m.count(), 4 * 3);
        assert!(m.get(g.index([2, 2, 0])));
        assert!(!m.get(g.index([6, 2, 0])));
    }

    #[test]
    fn polygon_matches_point_in_polygon() {
        let g = EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], 1.0 / 50.0).unwrap();
        let tri = [[-0.7013, -0.5021], [0.8047, -0.3109], [0.0531, 0.7717]];
        let m = polygon(g, MaskKind::Compact, &tri);
        let inside = |p: &[f64; 3]| {
            let s = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            s(tri[0], tri[1]) >= 0.0 && s(tri[1], tri[2]) >= 0.0 && s(tri[2], tri[0]) >= 0.0
        };
        let reference = SetMask::from_fn(g, MaskKind::Compact, inside);
        assert_eq!(m.symmetric_difference_count(&reference).unwrap(), 0);
    }

    #[test]
    fn shoelace_area() {
        assert_eq!(polygon_area(&[[0.0, 0.0], [2.0, 0.0], [2.0, 3.0], [0.0, 3.0]]), 6.0);
    }
}
