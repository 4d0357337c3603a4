//! Capacity along converging deformation sequences, and closure of the
//! regular-domain diagnostic under such limits.

use std::f64::consts::PI;

use super::{PropertyReport, TrialRecord};
use crate::capacity::{relative_capacity, CapacityProblem, SolverOptions};
use crate::deformation::{
    check_admissibility, element_gradients, rasterize_image, Bump, Deformation, ImageRegion,
};
use crate::energy::{deformed_capacity_from, Electrostatics};
use crate::geometry::{regularity_density, shapes, EulerianGrid, MaskKind, SetMask};
use crate::{Error, Reason, Result};

/// One member `y^n = y + decay^n · bump` of a converging sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub index: usize,
    /// Largest vertex distance to the limit deformation.
    pub delta: f64,
    pub capacity: f64,
    /// `capacity - cap(limit)`, signed.
    pub gap: f64,
}

/// Grid tolerance `τ(h) = C · h · |∂E|` with `C` measured on a concentric
/// condenser of radii 0.25 and 1 at the same spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceCalibration {
    pub dim: usize,
    pub spacing: f64,
    pub oracle_value: f64,
    pub oracle_exact: f64,
    /// `|oracle_value - oracle_exact| / (h · |∂B_0.25|)`.
    pub constant: f64,
}

impl ToleranceCalibration {
    /// Tolerance for a conductor of boundary measure `measure`.
    pub fn tolerance(&self, measure: f64) -> f64 {
        self.constant * self.spacing * measure
    }
}

pub fn calibrate_tolerance(dim: usize, h: f64, opts: &SolverOptions) -> Result<ToleranceCalibration> {
    let (r, big_r) = (0.25f64, 1.0f64);
    let (exact, measure) = match dim {
        2 => (2.0 * PI / (big_r / r).ln(), 2.0 * PI * r),
        3 => (4.0 * PI * r * big_r / (big_r - r), 4.0 * PI * r * r),
        _ => return Err(Error::UnsupportedDimension(format!("dimension {dim}"))),
    };
    let lo = vec![-big_r - 2.0 * h; dim];
    let hi = vec![big_r + 2.0 * h; dim];
    let grid = EulerianGrid::covering(dim, &lo, &hi, h)?;
    let zero = vec![0.0; dim];
    let e = shapes::ball(grid, MaskKind::Compact, &zero, r);
    let d = shapes::ball(grid, MaskKind::Open, &zero, big_r);
    let value = relative_capacity(&CapacityProblem::new(e, d)?, opts)?.value;
    Ok(ToleranceCalibration {
        dim,
        spacing: h,
        oracle_value: value,
        oracle_exact: exact,
        constant: (value - exact).abs() / (h * measure),
    })
}

/// Length (2D) or area (3D) of the deformed conductor boundary.
pub fn conductor_boundary_measure(def: &Deformation) -> f64 {
    let dim = def.dim();
    let y = def.positions();
    def.domain()
        .interface_facets()
        .iter()
        .map(|(f, _)| {
            let a = y[f[0]];
            let u: Vec<f64> = (0..3).map(|k| y[f[1]][k] - a[k]).collect();
            if dim == 2 {
                u[0].hypot(u[1])
            } else {
                let v: Vec<f64> = (0..3).map(|k| y[f[2]][k] - a[k]).collect();
                let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
        })
        .sum()
}

fn require_admissible(def: &Deformation, grid: &EulerianGrid) -> Result<()> {
    if let Some((element, f)) = element_gradients(def).iter().enumerate().find(|(_, f)| f.determinant() <= 0.0) {
        return Err(Error::Inadmissible { element, det: f.determinant() });
    }
    let report = check_admissibility(def, grid);
    if report.overlap_cells > 0 {
        return Err(Error::InvalidArgument(format!("limit image overlaps itself in {} cells", report.overlap_cells)));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SemicontinuityOutcome {
    pub records: Vec<SequenceRecord>,
    pub report: PropertyReport,
    pub limit_capacity: f64,
    pub calibration: ToleranceCalibration,
    /// `τ(h)` for the limit image.
    pub tolerance: f64,
    /// First index that could not be evaluated, with the reason.
    pub truncated: Option<(usize, Reason)>,
}

/// Capacities of `y^n = limit + decay^n · bump`, `n = 0..=n_max`, against the
/// capacity of the limit image, for the capacity selected by `setup.kind`.
///
/// The single violation counted is a final gap `|gap| > τ(h)`. The report
/// also notes whether `|gap_n|` is nonincreasing from `n = 3` and the sign
/// pattern of the gaps, since one-sided convergence is expected to show.
pub fn check_semicontinuity(
    limit: &Deformation,
    bump: &Bump,
    decay: f64,
    n_max: usize,
    setup: &Electrostatics,
) -> Result<SemicontinuityOutcome> {
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::InvalidArgument("decay must lie in (0, 1)".into()));
    }
    setup.validate(limit.dim())?;
    require_admissible(limit, &setup.grid)?;
    let calibration = calibrate_tolerance(limit.dim(), setup.grid.spacing(), &setup.solver)?;
    let tolerance = calibration.tolerance(conductor_boundary_measure(limit));
    let base = deformed_capacity_from(limit, setup, None)?;
    let mut records = Vec::new();
    let mut truncated = None;
    let mut warm = Some(base.clone());
    for n in 0..=n_max {
        let y = bump.apply(limit, decay.powi(n as i32));
        let outcome = require_admissible(&y, &setup.grid).and_then(|_| deformed_capacity_from(&y, setup, warm.as_ref()));
        match outcome {
            Ok(cap) => {
                records.push(SequenceRecord {
                    index: n,
                    delta: y.max_distance(limit),
                    capacity: cap.value,
                    gap: cap.value - base.value,
                });
                warm = Some(cap);
            }
            Err(err) => {
                let reason = Reason::from_error(&err).unwrap_or(Reason::Inadmissible);
                truncated = Some((n, reason));
                break;
            }
        }
    }
    let mut report = PropertyReport::new("semicontinuity", tolerance);
    let last = records.len().saturating_sub(1);
    for (k, r) in records.iter().enumerate() {
        let excess = r.gap.abs() - tolerance;
        let violations = usize::from(k == last && excess > 0.0);
        report.push(TrialRecord { trial: r.index, values: vec![r.delta, r.capacity, r.gap], excess, violations });
    }
    if truncated.is_some() || records.is_empty() {
        report.violations += 1;
    }
    let tail: Vec<f64> = records.iter().filter(|r| r.index >= 3).map(|r| r.gap.abs()).collect();
    let signs: String = records
        .iter()
        .map(|r| match r.gap.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => '+',
            Some(std::cmp::Ordering::Less) => '-',
            _ => '0',
        })
        .collect();
    report.note("spacing", setup.grid.spacing());
    report.note("limit_capacity", base.value);
    report.note("calibration_constant", calibration.constant);
    report.note("tau", tolerance);
    report.note("final_gap", records.last().map_or(f64::NAN, |r| r.gap));
    report.note("gap_nonincreasing_from_3", tail.windows(2).all(|w| w[1] <= w[0]));
    report.note("gap_signs", signs);
    if let Some((n, reason)) = truncated {
        report.note("truncated_at", n);
        report.note("truncation_reason", reason);
    }
    Ok(SemicontinuityOutcome { records, report, limit_capacity: base.value, calibration, tolerance, truncated })
}

/// Regularity density of a limit set against that of the sequence members.
/// Violation: limit density below `b - c · h / r0`. Members below `b` do not
/// satisfy the hypothesis and are only counted in the note
/// `members_below_b`.
pub fn check_regularity_closure_masks(
    members: &[SetMask],
    limit: &SetMask,
    b: f64,
    r0: f64,
    c: f64,
) -> Result<PropertyReport> {
    let h = limit.grid().spacing();
    let slack = c * h / r0;
    let mut report = PropertyReport::new("regularity_closure", slack);
    let mut below = 0;
    for (n, m) in members.iter().enumerate() {
        let density = regularity_density(m, r0)?.min_density;
        below += usize::from(density < b);
        report.push(TrialRecord { trial: n, values: vec![density], excess: b - density - slack, violations: 0 });
    }
    let lim = regularity_density(limit, r0)?;
    let excess = b - lim.min_density - slack;
    report.push(TrialRecord {
        trial: members.len(),
        values: vec![lim.min_density],
        excess,
        violations: usize::from(excess > 0.0),
    });
    report.note("b", b);
    report.note("r0", r0);
    report.note("limit_density", lim.min_density);
    report.note("members_below_b", below);
    Ok(report)
}

/// [`check_regularity_closure_masks`] on the rasterized images `y^n(Ω)` with
/// slack constant 1.
pub fn check_regularity_closure(
    members: &[Deformation],
    limit: &Deformation,
    grid: &EulerianGrid,
    b: f64,
    r0: f64,
) -> Result<PropertyReport> {
    let masks: Vec<SetMask> =
        members.iter().map(|d| rasterize_image(d, ImageRegion::WholeDomain, grid)).collect::<Result<_>>()?;
    let lim = rasterize_image(limit, ImageRegion::WholeDomain, grid)?;
    check_regularity_closure_masks(&masks, &lim, b, r0, 1.0)
}
