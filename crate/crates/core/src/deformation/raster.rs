use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{element_gradients, Deformation, Region};
use crate::capacity::CompactSet;
use crate::geometry::{EulerianGrid, MaskKind, SetMask};
use crate::{Error, Result};

/// Which part of the deformed body to rasterize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageRegion {
    /// `y(ω̄)`, padded by half a cell, as a compact mask.
    ConductorClosure,
    /// `y(Ω)` as an open mask.
    WholeDomain,
}

/// Admissibility diagnostics of a deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub min_det: f64,
    pub all_dets_positive: bool,
    /// Largest outer `d`-distortion over elements.
    pub max_distortion_p: f64,
    /// Grid cells whose centre is interior to two or more deformed elements.
    pub overlap_cells: usize,
    /// Largest displacement of a clamped vertex.
    pub gamma0_violation: f64,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.all_dets_positive && self.overlap_cells == 0 && self.gamma0_violation == 0.0
    }
}

const BARY_TOL: f64 = 1e-12;

/// A deformed simplex ready for point queries.
struct Simplex {
    dim: usize,
    pts: Vec<[f64; 3]>,
    inv: DMatrix<f64>,
}

impl Simplex {
    fn new(def: &Deformation, e: usize) -> Option<Simplex> {
        let el = &def.domain().elements()[e];
        let pts: Vec<[f64; 3]> = el.iter().map(|&v| def.positions()[v]).collect();
        let inv = def.edge_matrix(e).try_inverse()?;
        Some(Simplex { dim: def.dim(), pts, inv })
    }

    fn bbox(&self, pad: f64) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.pts {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a] - pad);
                hi[a] = hi[a].max(p[a] + pad);
            }
        }
        (lo, hi)
    }

    /// Smallest barycentric coordinate of `x`.
    fn min_bary(&self, x: &[f64; 3]) -> f64 {
        let r = DVector::from_fn(self.dim, |a, _| x[a] - self.pts[0][a]);
        let lam = &self.inv * r;
        let l0 = 1.0 - lam.sum();
        lam.iter().fold(l0, |m, &l| m.min(l))
    }

    fn contains(&self, x: &[f64; 3]) -> bool {
        self.min_bary(x) >= -BARY_TOL
    }

    fn contains_strictly(&self, x: &[f64; 3]) -> bool {
        self.min_bary(x) > BARY_TOL
    }

    fn distance(&self, x: &[f64; 3]) -> f64 {
        if self.contains(x) {
            return 0.0;
        }
        let n = self.pts.len();
        if self.dim == 2 {
            (0..n).map(|k| point_segment(x, &self.pts[k], &self.pts[(k + 1) % n])).fold(f64::INFINITY, f64::min)
        } else {
            (0..n)
                .map(|skip| {
                    let f: Vec<&[f64; 3]> = (0..n).filter(|&k| k != skip).map(|k| &self.pts[k]).collect();
                    point_triangle(x, f[0], f[1], f[2])
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn point_segment(x: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab = sub(b, a);
    let t = (dot(&sub(x, a), &ab) / dot(&ab, &ab)).clamp(0.0, 1.0);
    norm(&sub(x, &[a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]))
}

/// Distance from `p` to the triangle `abc` in 3D (closest-point by Voronoi
/// regions).
fn point_triangle(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(&ap);
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return norm(&bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return point_segment(p, a, b);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return norm(&cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return point_segment(p, a, c);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return point_segment(p, b, c);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    let q = [0, 1, 2].map(|k| a[k] + ab[k] * v + ac[k] * w);
    norm(&sub(p, &q))
}

/// Cells whose centres lie in the box `[lo, hi]`.
fn cells_in_box(grid: &EulerianGrid, lo: &[f64; 3], hi: &[f64; 3]) -> Vec<usize> {
    let dim = grid.dim();
    let mut ranges = [(0usize, 1usize); 3];
    for a in 0..dim {
        ranges[a] = grid.cell_range(a, lo[a], hi[a]);
    }
    let mut out = Vec::new();
    for k in ranges[2].0..ranges[2].1 {
        for j in ranges[1].0..ranges[1].1 {
            for i in ranges[0].0..ranges[0].1 {
                out.push(grid.index([i, j, k]));
            }
        }
    }
    out
}

/// Admissibility diagnostics; never fails. Distortion uses `p = d`.
pub fn check_admissibility(def: &Deformation, grid: &EulerianGrid) -> AdmissibilityReport {
    let dim = def.dim();
    let grads = element_gradients(def);
    let mut min_det = f64::INFINITY;
    let mut max_distortion_p: f64 = 0.0;
    for f in &grads {
        let det = f.determinant();
        min_det = min_det.min(det);
        if det > 0.0 {
            max_distortion_p = max_distortion_p.max(f.norm() / det.powf(1.0 / dim as f64));
        }
    }
    let domain = def.domain();
    let gamma0_violation = domain
        .gamma0()
        .iter()
        .map(|&v| norm(&sub(&def.positions()[v], &domain.vertices()[v])))
        .fold(0.0, f64::max);

    let overlap_cells = if grid.dim() == dim {
        let hits: Vec<Vec<usize>> = (0..domain.n_elements())
            .into_par_iter()
            .map(|e| {
                let Some(s) = Simplex::new(def, e) else { return Vec::new() };
                let (lo, hi) = s.bbox(0.0);
                cells_in_box(grid, &lo, &hi).into_iter().filter(|&c| s.contains_strictly(&grid.center(c))).collect()
            })
            .collect();
        let mut count = vec![0u8; grid.n_cells()];
        for c in hits.into_iter().flatten() {
            count[c] = count[c].saturating_add(1);
        }
        count.iter().filter(|&&k| k >= 2).count()
    } else {
        0
    };

    AdmissibilityReport {
        min_det,
        all_dets_positive: min_det > 0.0,
        max_distortion_p,
        overlap_cells,
        gamma0_violation,
    }
}

/// Rasterizes `y(ω̄)` or `y(Ω)`: a cell is occupied iff its centre lies in a
/// deformed element of the region. The conductor closure also takes every
/// cell within `h/2` of a deformed conductor element.
pub fn rasterize_image(def: &Deformation, region: ImageRegion, grid: &EulerianGrid) -> Result<SetMask> {
    let dim = def.dim();
    if grid.dim() != dim {
        return Err(Error::GridMismatch);
    }
    let domain = def.domain();
    for (e, f) in element_gradients(def).iter().enumerate() {
        let det = f.determinant();
        if det <= 0.0 {
            return Err(Error::Inadmissible { element: e, det });
        }
    }
    let (pad, kind) = match region {
        ImageRegion::ConductorClosure => (0.5 * grid.spacing(), MaskKind::Compact),
        ImageRegion::WholeDomain => (0.0, MaskKind::Open),
    };
    let selected: Vec<usize> = (0..domain.n_elements())
        .filter(|&e| region == ImageRegion::WholeDomain || domain.region(e) == Region::Conductor)
        .collect();

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &e in &selected {
        for &v in &domain.elements()[e] {
            for a in 0..dim {
                lo[a] = lo[a].min(def.positions()[v][a] - pad);
                hi[a] = hi[a].max(def.positions()[v][a] + pad);
            }
        }
    }
    if !grid.strictly_contains_box(&lo, &hi) {
        return Err(Error::OutOfBounds);
    }

    let hits: Vec<Vec<usize>> = selected
        .par_iter()
        .map(|&e| {
            let s = Simplex::new(def, e).expect("positive determinant");
            let (lo, hi) = s.bbox(pad);
            cells_in_box(grid, &lo, &hi)
                .into_iter()
                .filter(|&c| {
                    let x = grid.center(c);
                    if pad > 0.0 {
                        s.distance(&x) <= pad
                    } else {
                        s.contains(&x)
                    }
                })
                .collect()
        })
        .collect();
    let mut mask = SetMask::empty(*grid, kind);
    for c in hits.into_iter().flatten() {
        mask.set(c, true);
    }
    Ok(mask)
}

/// The deformed conductor `y(ω̄)` as a compact set for self-capacity.
#[derive(Debug, Clone, Copy)]
pub struct ConductorImage<'a> {
    pub deformation: &'a Deformation,
}

impl CompactSet for ConductorImage<'_> {
    fn dim(&self) -> usize {
        self.deformation.dim()
    }

    fn bounding_ball(&self) -> ([f64; 3], f64) {
        let def = self.deformation;
        let domain = def.domain();
        let dim = def.dim();
        let verts: Vec<usize> = (0..domain.n_elements())
            .filter(|&e| domain.region(e) == Region::Conductor)
            .flat_map(|e| domain.elements()[e].iter().copied())
            .collect();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in &verts {
            for a in 0..dim {
                lo[a] = lo[a].min(def.positions()[v][a]);
                hi[a] = hi[a].max(def.positions()[v][a]);
            }
        }
        let mut center = [0.0; 3];
        for a in 0..dim {
            center[a] = 0.5 * (lo[a] + hi[a]);
        }
        let radius = verts.iter().map(|&v| norm(&sub(&def.positions()[v], &center))).fold(0.0, f64::max);
        (center, radius)
    }

    fn rasterize(&self, grid: &EulerianGrid) -> Result<SetMask> {
        rasterize_image(self.deformation, ImageRegion::ConductorClosure, grid)
    }
}
