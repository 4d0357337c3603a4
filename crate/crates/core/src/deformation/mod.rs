//! Lagrangian side: reference meshes, piecewise-affine deformations, their
//! admissibility diagnostics and the transfer of deformed images onto an
//! Eulerian grid.

pub mod demo;
mod mesh;
mod raster;

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use mesh::{ReferenceDomain, Region};
pub use raster::{check_admissibility, rasterize_image, AdmissibilityReport, ConductorImage, ImageRegion};

use crate::{Error, Result};

/// Nodal positions of a continuous piecewise-affine map on a reference mesh.
/// Clamped vertices always keep their reference positions.
#[derive(Debug, Clone)]
pub struct Deformation {
    domain: Arc<ReferenceDomain>,
    positions: Vec<[f64; 3]>,
}

impl Deformation {
    pub fn identity(domain: Arc<ReferenceDomain>) -> Self {
        let positions = domain.vertices().to_vec();
        Self { domain, positions }
    }

    /// Fails with `InvalidArgument` if the count is wrong or a clamped vertex
    /// is moved.
    pub fn new(domain: Arc<ReferenceDomain>, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != domain.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "{} positions for {} vertices",
                positions.len(),
                domain.n_vertices()
            )));
        }
        if let Some(&v) = domain.gamma0().iter().find(|&&v| positions[v] != domain.vertices()[v]) {
            return Err(Error::InvalidArgument(format!("clamped vertex {v} is displaced")));
        }
        if positions.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument("non-finite position".into()));
        }
        Ok(Self { domain, positions })
    }

    /// `y(x) = x + u(x)` evaluated at the vertices; `u` is ignored on `Γ0`.
    pub fn from_displacement(domain: Arc<ReferenceDomain>, u: impl Fn(&[f64; 3]) -> [f64; 3]) -> Self {
        let dim = domain.dim();
        let positions = domain
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                if domain.is_clamped(i) {
                    return *x;
                }
                let d = u(x);
                let mut y = *x;
                for a in 0..dim {
                    y[a] += d[a];
                }
                y
            })
            .collect();
        Self { domain, positions }
    }

    pub fn domain(&self) -> &Arc<ReferenceDomain> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    /// Moves a free vertex. Clamped vertices cannot be moved.
    pub fn set_position(&mut self, v: usize, p: [f64; 3]) -> Result<()> {
        if self.domain.is_clamped(v) {
            return Err(Error::InvalidArgument(format!("vertex {v} is clamped")));
        }
        self.positions[v] = p;
        Ok(())
    }

    /// Largest vertex displacement between two deformations of one mesh.
    pub fn max_distance(&self, other: &Deformation) -> f64 {
        self.positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Deformed edge matrix of element `e`.
    pub fn edge_matrix(&self, e: usize) -> DMatrix<f64> {
        mesh::edge_matrix(self.dim(), &self.positions, &self.domain.elements()[e])
    }

    /// Deformation file: a `DEFORMATION <dim> <n>` line, then one
    /// `index x y [z]` row per vertex.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let dim = self.dim();
        writeln!(w, "DEFORMATION {dim} {}", self.positions.len())?;
        for (i, p) in self.positions.iter().enumerate() {
            let coords: Vec<String> = p[..dim].iter().map(|x| x.to_string()).collect();
            writeln!(w, "{i} {}", coords.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(domain: Arc<ReferenceDomain>, r: R) -> Result<Self> {
        let lines = mesh::content_lines(r)?;
        let Some((n0, head)) = lines.first() else {
            return Err(Error::Parse { line: 1, msg: "empty deformation file".into() });
        };
        let tok: Vec<&str> = head.split_whitespace().collect();
        if tok.len() != 3 || tok[0] != "DEFORMATION" {
            return Err(Error::Parse { line: *n0, msg: "expected `DEFORMATION <dim> <count>`".into() });
        }
        let dim: usize = mesh::num(tok[1], *n0)?;
        let n: usize = mesh::num(tok[2], *n0)?;
        if dim != domain.dim() || n != domain.n_vertices() {
            return Err(Error::Parse { line: *n0, msg: "deformation does not match the mesh".into() });
        }
        if lines.len() != n + 1 {
            return Err(Error::Parse { line: *n0, msg: format!("expected {n} rows, found {}", lines.len() - 1) });
        }
        let mut positions = vec![[0.0; 3]; n];
        let mut seen = vec![false; n];
        for (line, row) in &lines[1..] {
            let tok: Vec<&str> = row.split_whitespace().collect();
            if tok.len() != dim + 1 {
                return Err(Error::Parse { line: *line, msg: format!("row needs index and {dim} coordinates") });
            }
            let i: usize = mesh::num(tok[0], *line)?;
            if i >= n || seen[i] {
                return Err(Error::Parse { line: *line, msg: format!("bad or repeated vertex index {i}") });
            }
            seen[i] = true;
            for a in 0..dim {
                positions[i][a] = mesh::num(tok[a + 1], *line)?;
            }
        }
        Self::new(domain, positions)
    }
}

/// Constant gradient `F_e = D_def · D_ref^{-1}` of the deformation on element `e`.
pub fn element_gradient(def: &Deformation, e: usize) -> Result<DMatrix<f64>> {
    if e >= def.domain.n_elements() {
        return Err(Error::InvalidArgument(format!("no element {e}")));
    }
    Ok(def.edge_matrix(e) * def.domain.reference_inverse(e))
}

/// All element gradients, in element order.
pub fn element_gradients(def: &Deformation) -> Vec<DMatrix<f64>> {
    (0..def.domain.n_elements()).into_par_iter().map(|e| def.edge_matrix(e) * def.domain.reference_inverse(e)).collect()
}

/// Outer `p`-distortion `|F|_Frobenius / det(F)^{1/p}` per element, 0 where
/// `det F ≤ 0`.
pub fn outer_distortion(def: &Deformation, p: f64) -> Vec<f64> {
    element_gradients(def)
        .iter()
        .map(|f| {
            let det = f.determinant();
            if det > 0.0 {
                f.norm() / det.powf(1.0 / p)
            } else {
                0.0
            }
        })
        .collect()
}

/// Smooth bump `amplitude · φ(|x - center| / radius) · direction` with
/// `φ(t) = (1 - t²)³` for `t < 1`, applied to free vertices. A zero
/// `direction` means radial (away from `center`).
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
    pub direction: [f64; 3],
}

impl Bump {
    pub fn displacement(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut diff = [0.0; 3];
        for k in 0..3 {
            diff[k] = x[k] - self.center[k];
        }
        let dist = diff.iter().map(|c| c * c).sum::<f64>().sqrt();
        let t = dist / self.radius;
        if t >= 1.0 {
            return [0.0; 3];
        }
        let phi = (1.0 - t * t).powi(3) * self.amplitude;
        let dn = self.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if dn > 0.0 {
            self.direction.map(|c| phi * c / dn)
        } else if dist > 0.0 {
            diff.map(|c| phi * c / dist)
        } else {
            [0.0; 3]
        }
    }

    /// `base` displaced by `scale` times the bump.
    pub fn apply(&self, base: &Deformation, scale: f64) -> Deformation {
        let domain = base.domain.clone();
        let dim = domain.dim();
        let positions = base
            .positions
            .iter()
            .enumerate()
            .map(|(i, y)| {
                if domain.is_clamped(i) {
                    return *y;
                }
                let d = self.displacement(&domain.vertices()[i]);
                let mut p = *y;
                for a in 0..dim {
                    p[a] += scale * d[a];
                }
                p
            })
            .collect();
        Deformation { domain, positions }
    }
}
