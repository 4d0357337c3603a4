//! The electroelastic functionals.
//!
//! `F1(y) = ∫_Ω W(x, ∇y) dx + Q² / (2 cap(y(ω̄)))` uses the self-capacity of
//! the deformed conductor and needs `d = 3`. `F2` replaces it with the
//! capacity of `y(ω̄)` relative to `y(Ω)` and works in two and three
//! dimensions.

mod density;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use density::{density, stress, Energy, MaterialModel, MaterialParams};

use crate::capacity::{
    relative_capacity_from, self_capacity_scheduled, CapacityProblem, CapacityResult, SelfCapacitySchedule,
    SolverOptions,
};
use crate::deformation::{
    check_admissibility, element_gradients, rasterize_image, AdmissibilityReport, ConductorImage, Deformation,
    ImageRegion,
};
use crate::geometry::{EulerianGrid, SetMask};
use crate::{parallel, Error, Reason, Result};

/// Which functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    F1,
    F2,
}

impl FunctionalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FunctionalKind::F1 => "F1",
            FunctionalKind::F2 => "F2",
        }
    }
}

/// Everything the electrostatic term needs besides the deformation.
#[derive(Debug, Clone, PartialEq)]
pub struct Electrostatics {
    pub charge: f64,
    pub kind: FunctionalKind,
    /// Grid for `F2` rasterization and for overlap diagnostics.
    pub grid: EulerianGrid,
    /// Truncation schedule for `F1`.
    pub schedule: SelfCapacitySchedule,
    pub solver: SolverOptions,
}

impl Electrostatics {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.charge >= 0.0 && self.charge.is_finite()) {
            return Err(Error::InvalidArgument(format!("charge must be finite and nonnegative, got {}", self.charge)));
        }
        if self.kind == FunctionalKind::F1 && dim != 3 {
            return Err(Error::UnsupportedDimension("F1 uses the self-capacity, which needs d = 3".into()));
        }
        if self.grid.dim() != dim {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Terms of a functional evaluation.
#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub kind: FunctionalKind,
    pub elastic: Energy,
    pub capacity_value: Option<f64>,
    pub electrostatic: Energy,
    pub total: Energy,
    pub admissibility: AdmissibilityReport,
    /// Why the total is `+inf`, when it is.
    pub reason: Option<Reason>,
    pub capacity: Option<CapacityResult>,
    /// What the capacity depends on, for reuse by later evaluations.
    key: Option<CapacityKey>,
}

/// Inputs that determine the capacity value exactly.
#[derive(Debug, Clone, PartialEq)]
enum CapacityKey {
    /// Rasterized conductor and domain.
    Masks(SetMask, SetMask),
    /// Deformed positions of the vertices of conductor elements.
    Conductor(Vec<[f64; 3]>),
}

impl EnergyBreakdown {
    /// Flat `key = value` record.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let a = &self.admissibility;
        let cap = self.capacity_value.map_or("none".to_string(), |v| v.to_string());
        let reason = self.reason.map_or("none", Reason::as_str);
        let _ = writeln!(s, "kind = {}", self.kind.as_str());
        let _ = writeln!(s, "elastic = {}", self.elastic);
        let _ = writeln!(s, "capacity = {cap}");
        let _ = writeln!(s, "electrostatic = {}", self.electrostatic);
        let _ = writeln!(s, "total = {}", self.total);
        let _ = writeln!(s, "reason = {reason}");
        let _ = writeln!(s, "min_det = {}", a.min_det);
        let _ = writeln!(s, "all_dets_positive = {}", a.all_dets_positive);
        let _ = writeln!(s, "max_distortion = {}", a.max_distortion_p);
        let _ = writeln!(s, "overlap_cells = {}", a.overlap_cells);
        let _ = writeln!(s, "gamma0_violation = {}", a.gamma0_violation);
        s
    }
}

/// `∫_Ω W(x, ∇y) dx - ∫_Ω f·y dx`, exact for piecewise-affine `y`. Summed
/// in element order.
pub fn elastic_energy(def: &Deformation, model: &MaterialModel) -> Energy {
    let grads = element_gradients(def);
    elastic_energy_with(def, model, &grads)
}

fn elastic_energy_with(def: &Deformation, model: &MaterialModel, grads: &[DMatrix<f64>]) -> Energy {
    let domain = def.domain();
    let dim = def.dim();
    let per: Vec<Energy> = grads
        .par_iter()
        .enumerate()
        .map(|(e, f)| {
            let region = domain.region(e);
            match density(model, region, f) {
                Energy::Finite(w) => {
                    let load = model.params(region).load;
                    let el = &domain.elements()[e];
                    let mut work = 0.0;
                    for a in 0..dim {
                        let mean = el.iter().map(|&v| def.positions()[v][a]).sum::<f64>() / el.len() as f64;
                        work += load[a] * mean;
                    }
                    Energy::Finite((w - work) * domain.volume(e))
                }
                Energy::Infinite => Energy::Infinite,
            }
        })
        .collect();
    if per.iter().any(|e| !e.is_finite()) {
        return Energy::Infinite;
    }
    Energy::Finite(parallel::sum_by(per.len(), |e| per[e].value().unwrap()))
}

/// Derivative of [`elastic_energy`] with respect to the vertex positions;
/// zero rows on clamped vertices. Fails with `Inadmissible` if some
/// `det F ≤ 0`.
pub fn elastic_gradient(def: &Deformation, model: &MaterialModel) -> Result<Vec<[f64; 3]>> {
    let domain = def.domain();
    let dim = def.dim();
    let grads = element_gradients(def);
    let per: Vec<DMatrix<f64>> = grads
        .par_iter()
        .enumerate()
        .map(|(e, f)| {
            let region = domain.region(e);
            let p = stress(model, region, f).ok_or(Error::Inadmissible { element: e, det: f.determinant() })?;
            // Column k - 1 is the force on local vertex k >= 1.
            Ok(p * domain.reference_inverse(e).transpose() * domain.volume(e))
        })
        .collect::<Result<_>>()?;
    let mut g = vec![[0.0; 3]; domain.n_vertices()];
    for (e, m) in per.iter().enumerate() {
        let el = &domain.elements()[e];
        let load = model.params(domain.region(e)).load;
        let share = domain.volume(e) / el.len() as f64;
        for a in 0..dim {
            let mut first = 0.0;
            for k in 1..el.len() {
                g[el[k]][a] += m[(a, k - 1)];
                first += m[(a, k - 1)];
            }
            g[el[0]][a] -= first;
            for &v in el {
                g[v][a] -= load[a] * share;
            }
        }
    }
    for &v in domain.gamma0() {
        g[v] = [0.0; 3];
    }
    Ok(g)
}

/// Capacity of the deformed configuration used by the functional.
pub fn deformed_capacity(def: &Deformation, setup: &Electrostatics) -> Result<CapacityResult> {
    deformed_capacity_from(def, setup, None)
}

/// [`deformed_capacity`] with the `F2` solve warm-started from `warm`.
pub fn deformed_capacity_from(
    def: &Deformation,
    setup: &Electrostatics,
    warm: Option<&CapacityResult>,
) -> Result<CapacityResult> {
    let key = capacity_key(def, setup)?;
    capacity_for(def, setup, key, warm)
}

fn capacity_key(def: &Deformation, setup: &Electrostatics) -> Result<CapacityKey> {
    Ok(match setup.kind {
        FunctionalKind::F1 => {
            let domain = def.domain();
            let mut verts: Vec<usize> = (0..domain.n_elements())
                .filter(|&e| domain.region(e) == crate::deformation::Region::Conductor)
                .flat_map(|e| domain.elements()[e].iter().copied())
                .collect();
            verts.sort_unstable();
            verts.dedup();
            CapacityKey::Conductor(verts.iter().map(|&v| def.positions()[v]).collect())
        }
        FunctionalKind::F2 => CapacityKey::Masks(
            rasterize_image(def, ImageRegion::ConductorClosure, &setup.grid)?,
            rasterize_image(def, ImageRegion::WholeDomain, &setup.grid)?,
        ),
    })
}

fn capacity_for(
    def: &Deformation,
    setup: &Electrostatics,
    key: CapacityKey,
    warm: Option<&CapacityResult>,
) -> Result<CapacityResult> {
    match key {
        CapacityKey::Conductor(_) => {
            self_capacity_scheduled(&ConductorImage { deformation: def }, &setup.schedule, &setup.solver)
        }
        CapacityKey::Masks(e, d) => {
            relative_capacity_from(&CapacityProblem::new(e, d)?, &setup.solver, warm.map(|c| &c.potential))
        }
    }
}

/// Evaluates the functional. Inadmissible states, images leaving the grid,
/// degenerate separations and failed solves give `total = +inf` with a
/// reason; other errors (dimension, invalid setup) are returned.
pub fn total_energy(def: &Deformation, model: &MaterialModel, setup: &Electrostatics) -> Result<EnergyBreakdown> {
    evaluate(def, model, setup, true)
}

/// As [`total_energy`]; with `with_capacity = false` and zero charge the
/// capacity solve is skipped and `capacity_value` is `None`.
pub fn evaluate(
    def: &Deformation,
    model: &MaterialModel,
    setup: &Electrostatics,
    with_capacity: bool,
) -> Result<EnergyBreakdown> {
    evaluate_near(def, model, setup, with_capacity, None)
}

/// As [`evaluate`], reusing the capacity of `previous` when the rasterized
/// images (`F2`) or the deformed conductor (`F1`) are unchanged, and
/// warm-starting the solve from its potential otherwise.
pub fn evaluate_near(
    def: &Deformation,
    model: &MaterialModel,
    setup: &Electrostatics,
    with_capacity: bool,
    previous: Option<&EnergyBreakdown>,
) -> Result<EnergyBreakdown> {
    let dim = def.dim();
    model.validate(dim)?;
    setup.validate(dim)?;
    let grads = element_gradients(def);
    let elastic = elastic_energy_with(def, model, &grads);
    let admissibility = check_admissibility(def, &setup.grid);
    let mut out = EnergyBreakdown {
        kind: setup.kind,
        elastic,
        capacity_value: None,
        electrostatic: Energy::Infinite,
        total: Energy::Infinite,
        admissibility,
        reason: None,
        capacity: None,
        key: None,
    };
    if !out.admissibility.all_dets_positive {
        out.reason = Some(Reason::Inadmissible);
        return Ok(out);
    }
    if !with_capacity && setup.charge == 0.0 {
        out.electrostatic = Energy::Finite(0.0);
        out.total = elastic;
        return Ok(out);
    }
    let prev = previous.and_then(|p| Some((p.key.as_ref()?, p.capacity.as_ref()?)));
    let computed = capacity_key(def, setup).and_then(|key| match prev {
        Some((k, c)) if *k == key => Ok((c.clone(), key)),
        _ => capacity_for(def, setup, key.clone(), prev.map(|(_, c)| c)).map(|c| (c, key)),
    });
    match computed {
        Ok((cap, key)) => {
            out.key = Some(key);
            let value = cap.value;
            out.capacity_value = Some(value);
            out.electrostatic = Energy::Finite(setup.charge * setup.charge / (2.0 * value));
            out.total = elastic + out.electrostatic;
            out.capacity = Some(cap);
        }
        Err(err) => match Reason::from_error(&err) {
            Some(reason) => out.reason = Some(reason),
            None => return Err(err),
        },
    }
    Ok(out)
}
