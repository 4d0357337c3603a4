//! Built-in demo meshes, each at refinement levels 0, 1 and 2.

use super::mesh::{edge_matrix, ReferenceDomain, Region};
use crate::{Error, Result};

/// Radius of the conductor in the 2D demos.
pub const CONDUCTOR_RADIUS: f64 = 0.25;
/// Half-width of the cube mapped onto the conductor ball in the 3D demo.
pub const BALL_RADIUS: f64 = 0.5;

fn check_level(level: usize) -> Result<()> {
    if level > 2 {
        return Err(Error::InvalidArgument(format!("demo meshes have levels 0..=2, got {level}")));
    }
    Ok(())
}

/// Fixes the orientation of a simplex in place.
fn orient(dim: usize, pts: &[[f64; 3]], el: &mut [usize]) {
    if edge_matrix(dim, pts, el).determinant() < 0.0 {
        el.swap(0, 1);
    }
}

/// Triangulates concentric rings. `ring_point(k, j)` gives vertex `j` of ring
/// `k`; ring 0 is the single centre point and ring `k` has `12k` vertices
/// starting at angle 0. Rings up to `conductor_rings` bound the conductor.
fn ring_mesh(
    rings: usize,
    conductor_rings: usize,
    ring_point: impl Fn(usize, usize) -> [f64; 3],
) -> (Vec<[f64; 3]>, Vec<Vec<usize>>, Vec<Region>, Vec<usize>) {
    let count = |k: usize| if k == 0 { 1 } else { 12 * k };
    let mut start = vec![0usize; rings + 2];
    for k in 0..=rings {
        start[k + 1] = start[k] + count(k);
    }
    let mut vertices = Vec::with_capacity(start[rings + 1]);
    for k in 0..=rings {
        for j in 0..count(k) {
            vertices.push(ring_point(k, j));
        }
    }
    let mut elements = Vec::new();
    let mut regions = Vec::new();
    for k in 1..=rings {
        let region = if k <= conductor_rings { Region::Conductor } else { Region::Insulator };
        let (n_in, n_out) = (count(k - 1), count(k));
        let id_in = |i: usize| start[k - 1] + i % n_in;
        let id_out = |j: usize| start[k] + j % n_out;
        // Merge the two rings by angle; `i / n_in` and `j / n_out` are the
        // normalized angles of the next vertices.
        let (mut i, mut j) = (0, 0);
        while i < n_in || j < n_out {
            let advance_outer = if k == 1 {
                true
            } else {
                j < n_out && (i >= n_in || (j + 1) * n_in <= (i + 1) * n_out)
            };
            let mut el = if advance_outer {
                let el = vec![id_in(i), id_out(j), id_out(j + 1)];
                j += 1;
                el
            } else {
                let el = vec![id_in(i), id_out(j), id_in(i + 1)];
                i += 1;
                el
            };
            if k == 1 && j == n_out {
                i = n_in;
            }
            orient(2, &vertices, &mut el);
            elements.push(el);
            regions.push(region);
        }
    }
    let outer = (start[rings]..start[rings + 1]).collect();
    (vertices, elements, regions, outer)
}

/// Unit disk with a conductor disk of radius 0.25, clamped on the whole
/// outer circle. Ring spacing is `1 / (8·2^level)`.
pub fn disk_in_disk(level: usize) -> Result<ReferenceDomain> {
    check_level(level)?;
    let rings = 8 << level;
    let (v, e, r, outer) = ring_mesh(rings, rings / 4, |k, j| {
        if k == 0 {
            return [0.0; 3];
        }
        let rho = k as f64 / rings as f64;
        let t = std::f64::consts::TAU * j as f64 / (12 * k) as f64;
        [rho * t.cos(), rho * t.sin(), 0.0]
    });
    ReferenceDomain::new(2, v, e, r, outer)
}

/// Square `[-1, 1]^2` with a conductor disk of radius 0.25, clamped on the
/// bottom edge. Rings stay circular up to radius 0.375 and blend linearly
/// into the square boundary beyond.
pub fn disk_in_square(level: usize) -> Result<ReferenceDomain> {
    check_level(level)?;
    let rings = 8 << level;
    let round = 3 * rings / 8;
    let (v, e, r, outer) = ring_mesh(rings, rings / 4, |k, j| {
        if k == 0 {
            return [0.0; 3];
        }
        let t = std::f64::consts::TAU * j as f64 / (12 * k) as f64;
        let (c, s) = (t.cos(), t.sin());
        let rho = k as f64 / rings as f64;
        let beta = if k <= round { 0.0 } else { (k - round) as f64 / (rings - round) as f64 };
        let sq = 1.0 / c.abs().max(s.abs());
        let scale = rho * ((1.0 - beta) + beta * sq);
        let mut p = [scale * c, scale * s, 0.0];
        if k == rings {
            // Snap the outer ring exactly onto the square.
            for x in &mut p[..2] {
                if (x.abs() - 1.0).abs() < 1e-12 {
                    *x = x.signum();
                }
            }
        }
        p
    });
    let bottom = outer.into_iter().filter(|&i| v[i][1] == -1.0).collect();
    ReferenceDomain::new(2, v, e, r, bottom)
}

/// Cube `[-1, 1]^3` cut into Kuhn tetrahedra and warped so that the inner
/// cube `[-0.5, 0.5]^3` becomes a ball of radius 0.5 (the conductor). The
/// whole outer boundary is clamped. `4·(level + 2)` cells per axis.
pub fn ball_in_cube(level: usize) -> Result<ReferenceDomain> {
    check_level(level)?;
    let n = 4 * (level + 2);
    let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let a = BALL_RADIUS;
    let mut vertices = Vec::with_capacity((n + 1).pow(3));
    let mut clamped = Vec::new();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let x = [i, j, k].map(|c| 2.0 * c as f64 / n as f64 - 1.0);
                let s = x.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                let y = if s == 0.0 {
                    [0.0; 3]
                } else {
                    let u = x.map(|c| c / s);
                    let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
                    let beta = if s <= a { 0.0 } else { (s - a) / (1.0 - a) };
                    u.map(|c| s * ((1.0 - beta) * c / norm + beta * c))
                };
                if [i, j, k].iter().any(|&c| c == 0 || c == n) {
                    clamped.push(idx(i, j, k));
                }
                vertices.push(y);
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let inner = |c: usize| c >= n / 4 && c < 3 * n / 4;
    let mut elements = Vec::with_capacity(6 * n * n * n);
    let mut regions = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let region = if inner(i) && inner(j) && inner(k) { Region::Conductor } else { Region::Insulator };
                for p in &perms {
                    let mut c = [i, j, k];
                    let mut el = vec![idx(c[0], c[1], c[2])];
                    for &axis in p {
                        c[axis] += 1;
                        el.push(idx(c[0], c[1], c[2]));
                    }
                    orient(3, &vertices, &mut el);
                    elements.push(el);
                    regions.push(region);
                }
            }
        }
    }
    ReferenceDomain::new(3, vertices, elements, regions, clamped)
}

/// Looks up a demo by name: `disk-in-disk`, `disk-in-square` or
/// `ball-in-cube`.
pub fn by_name(name: &str, level: usize) -> Result<ReferenceDomain> {
    match name {
        "disk-in-disk" => disk_in_disk(level),
        "disk-in-square" => disk_in_square(level),
        "ball-in-cube" => ball_in_cube(level),
        other => Err(Error::InvalidArgument(format!("unknown demo mesh `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn polygon_area(n: usize, r: f64) -> f64 {
        0.5 * n as f64 * r * r * (std::f64::consts::TAU / n as f64).sin()
    }

    #[test]
    fn disk_in_disk_volumes_match_inscribed_polygons() {
        for level in 0..=2 {
            let m = disk_in_disk(level).unwrap();
            let rings = 8 << level;
            let cond = polygon_area(12 * rings / 4, 0.25);
            let total = polygon_area(12 * rings, 1.0);
            assert!((m.region_volume(Region::Conductor) - cond).abs() < 1e-12);
            assert!((m.total_volume() - total).abs() < 1e-12);
            assert_eq!(m.gamma0().len(), 12 * rings);
        }
    }

    #[test]
    fn disk_in_square_covers_square() {
        for level in 0..=2 {
            let m = disk_in_square(level).unwrap();
            assert!((m.total_volume() - 4.0).abs() < 1e-12, "level {level}: {}", m.total_volume());
            let cond = polygon_area(12 * (8 << level) / 4, 0.25);
            assert!((m.region_volume(Region::Conductor) - cond).abs() < 1e-12);
            let n_bottom = 12 * (8 << level) / 4 + 1;
            assert_eq!(m.gamma0().len(), n_bottom);
        }
    }

    #[test]
    fn ball_in_cube_is_valid_and_close_to_a_ball() {
        for level in 0..=2 {
            let m = ball_in_cube(level).unwrap();
            assert!((m.total_volume() - 8.0).abs() < 1e-12);
            let ball = 4.0 / 3.0 * PI * BALL_RADIUS.powi(3);
            let vol = m.region_volume(Region::Conductor);
            assert!(vol < ball && vol > 0.8 * ball, "level {level}: {vol} vs {ball}");
        }
    }

    #[test]
    fn unknown_demo_and_level_rejected() {
        assert!(by_name("torus", 0).is_err());
        assert!(disk_in_disk(3).is_err());
    }
}
