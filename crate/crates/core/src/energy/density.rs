use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;

use crate::deformation::Region;
use crate::{Error, Result};

/// An energy value, or the `+inf` sentinel for inadmissible states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    Finite(f64),
    Infinite,
}

impl Energy {
    pub fn is_finite(self) -> bool {
        matches!(self, Energy::Finite(_))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Energy::Finite(v) => Some(v),
            Energy::Infinite => None,
        }
    }
}

impl std::ops::Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        match (self, rhs) {
            (Energy::Finite(a), Energy::Finite(b)) => Energy::Finite(a + b),
            _ => Energy::Infinite,
        }
    }
}

impl PartialOrd for Energy {
    fn partial_cmp(&self, other: &Energy) -> Option<Ordering> {
        match (self, other) {
            (Energy::Finite(a), Energy::Finite(b)) => a.partial_cmp(b),
            (Energy::Finite(_), Energy::Infinite) => Some(Ordering::Less),
            (Energy::Infinite, Energy::Finite(_)) => Some(Ordering::Greater),
            (Energy::Infinite, Energy::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Energy::Finite(v) => write!(f, "{v}"),
            Energy::Infinite => f.write_str("+inf"),
        }
    }
}

/// Coefficients of one material region, plus a constant dead-load force
/// density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub load: [f64; 3],
}

impl MaterialParams {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, load: [0.0; 3] }
    }
}

/// Polyconvex stored energy
///
/// ```text
/// W(F) = a (|F|^q - d^{q/2} - q d^{q/2-1} (det F - 1))
///      + b (|F|^{ds} / det(F)^s - d^{ds/2})
///      + c (det F - 1)^2
/// ```
///
/// for `det F > 0` and `+inf` otherwise, with region-dependent `a, b, c`.
/// `|F|` is the Frobenius norm. The term linear in `det F` is a null
/// Lagrangian that makes `∂W/∂F (Id) = 0`; with it `W ≥ 0 = W(Id)`, since
/// `|F|^2 ≥ d det(F)^{2/d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    pub conductor: MaterialParams,
    pub insulator: MaterialParams,
    pub q: f64,
    pub s: f64,
}

impl MaterialModel {
    pub fn params(&self, region: Region) -> &MaterialParams {
        match region {
            Region::Conductor => &self.conductor,
            Region::Insulator => &self.insulator,
        }
    }

    /// Checks `q > d`, `s > d - 1`, `a, b, c ≥ 0` and `min(a, b) > 0`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let d = dim as f64;
        if !(self.q > d) {
            return Err(Error::InvalidArgument(format!("q = {} must exceed the dimension {dim}", self.q)));
        }
        if !(self.s > d - 1.0) {
            return Err(Error::InvalidArgument(format!("s = {} must exceed {}", self.s, dim - 1)));
        }
        for (name, p) in [("conductor", &self.conductor), ("insulator", &self.insulator)] {
            if !(p.a >= 0.0 && p.b >= 0.0 && p.c >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name}: a, b, c must be nonnegative")));
            }
            if !(p.a.min(p.b) > 0.0) {
                return Err(Error::InvalidArgument(format!("{name}: min(a, b) must be positive")));
            }
            if p.load.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name}: load must be finite")));
            }
        }
        Ok(())
    }

    /// Constant `c_W` with `W(F) ≥ c_W (|F|^q + |F|^{ds}/det^s) - 1/c_W` in
    /// both regions: `min(a/2, b, 1/(a d^{q/2} + b d^{ds/2} + M))`, where
    /// `M = a (q - d) d^{q/2-1} 2^{d/(q-d)}` bounds the linear `det` term by
    /// the other half of `a |F|^q`.
    pub fn growth_constant(&self, dim: usize) -> f64 {
        let d = dim as f64;
        let q = self.q;
        [&self.conductor, &self.insulator]
            .iter()
            .map(|p| {
                let m = p.a * (q - d) * d.powf(q / 2.0 - 1.0) * 2f64.powf(d / (q - d));
                let shift = p.a * d.powf(q / 2.0) + p.b * d.powf(d * self.s / 2.0) + m;
                (0.5 * p.a).min(p.b).min(1.0 / shift)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `W(region, F)`.
pub fn density(model: &MaterialModel, region: Region, f: &DMatrix<f64>) -> Energy {
    let det = f.determinant();
    if !(det > 0.0) {
        return Energy::Infinite;
    }
    let d = f.nrows() as f64;
    let p = model.params(region);
    let n = f.norm();
    let (q, s) = (model.q, model.s);
    let w = p.a * (n.powf(q) - d.powf(q / 2.0) - q * d.powf(q / 2.0 - 1.0) * (det - 1.0))
        + p.b * (n.powf(d * s) / det.powf(s) - d.powf(d * s / 2.0))
        + p.c * (det - 1.0).powi(2);
    Energy::Finite(w)
}

/// First Piola stress `∂W/∂F`; `None` where `det F ≤ 0`.
pub fn stress(model: &MaterialModel, region: Region, f: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let det = f.determinant();
    if !(det > 0.0) {
        return None;
    }
    let d = f.nrows() as f64;
    let p = model.params(region);
    let (q, s) = (model.q, model.s);
    let n = f.norm();
    let cof = f.clone().try_inverse()?.transpose();
    let ratio = n.powf(d * s) / det.powf(s);
    let mut out = f * (p.a * q * n.powf(q - 2.0));
    out -= &cof * (p.a * q * d.powf(q / 2.0 - 1.0) * det);
    out += f * (p.b * d * s * n.powf(d * s - 2.0) / det.powf(s));
    out -= &cof * (p.b * s * ratio);
    out += &cof * (2.0 * p.c * (det - 1.0) * det);
    Some(out)
}
