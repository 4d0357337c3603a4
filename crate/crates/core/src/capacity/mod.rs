//! Discrete capacitary potentials and capacities.
//!
//! The relative capacity of a compact conductor `E` inside an open domain `D`
//! is the minimum of the Dirichlet energy over functions equal to one near `E`
//! and vanishing outside `D`. On the grid the minimizer is the discrete
//! harmonic extension: `v = 1` on `E` cells, `v = 0` on cells outside `D`, and
//! the `2d + 1` point Laplace equation on the remaining cells. Truncating any
//! competitor at one cannot raise its energy, so no obstacle constraint is
//! needed. The capacity is the face-based Dirichlet energy of that solution,
//! which is exactly the discrete minimum.
//!
//! The self-capacity (three dimensions only) is obtained by exhaustion: the
//! relative capacity in growing balls `B_R`, each on its own grid, extrapolated
//! to `R = ∞`.

mod flux;
pub mod solver;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

pub use flux::{boundary_flux_density, BoundaryFace};
pub use solver::{CellState, Preconditioner, SolverOptions};

use crate::geometry::{shapes, EulerianGrid, MaskKind, SetMask};
use crate::{parallel, Error, Result};

/// Pair of a compact conductor and an enclosing bounded open domain.
#[derive(Debug, Clone)]
pub struct CapacityProblem {
    conductor: SetMask,
    domain: SetMask,
}

impl CapacityProblem {
    /// Validates `E ⊆ D` with a separating layer of free cells: no conductor
    /// cell may touch, across a face, a cell outside `D`.
    pub fn new(conductor: SetMask, domain: SetMask) -> Result<Self> {
        if conductor.grid() != domain.grid() {
            return Err(Error::GridMismatch);
        }
        if conductor.is_empty() {
            return Err(Error::EmptySet);
        }
        let g = *conductor.grid();
        if conductor.touches_outer_layer() {
            return Err(Error::DegenerateSeparation("conductor touches the outermost grid layer".into()));
        }
        for i in conductor.iter_occupied() {
            if !domain.get(i) {
                return Err(Error::DegenerateSeparation("conductor is not contained in the domain".into()));
            }
            for dir in 0..2 * g.dim() {
                match g.neighbor(i, dir) {
                    Some(j) if domain.get(j) => {}
                    _ => {
                        return Err(Error::DegenerateSeparation(
                            "conductor touches the complement of the domain".into(),
                        ))
                    }
                }
            }
        }
        let free = conductor.cells().iter().zip(domain.cells()).any(|(&e, &d)| d && !e);
        if !free {
            return Err(Error::DegenerateSeparation("no free cells between conductor and domain boundary".into()));
        }
        Ok(Self { conductor, domain })
    }

    pub fn grid(&self) -> &EulerianGrid {
        self.conductor.grid()
    }

    pub fn conductor(&self) -> &SetMask {
        &self.conductor
    }

    pub fn domain(&self) -> &SetMask {
        &self.domain
    }

    fn states(&self) -> Vec<CellState> {
        self.conductor
            .cells()
            .iter()
            .zip(self.domain.cells())
            .map(|(&e, &d)| {
                if e {
                    CellState::Fixed(1.0)
                } else if d {
                    CellState::Free
                } else {
                    CellState::Fixed(0.0)
                }
            })
            .collect()
    }
}

/// Per-cell capacitary potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: EulerianGrid,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn new(grid: EulerianGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidArgument("field length does not match grid".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &EulerianGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Raw truncated capacities and the extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    /// `(R, cap(E; B_R))` pairs in schedule order.
    pub pairs: Vec<(f64, f64)>,
    pub limit: f64,
    /// Set when the raw sequence fails to decrease (beyond the solver
    /// tolerance) or the fit is unusable; the value is still returned.
    pub unreliable: bool,
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    pub potential: PotentialField,
    pub residual: f64,
    pub iterations: usize,
    pub extrapolation: Option<Extrapolation>,
    /// Conductor and domain masks the potential was solved on.
    pub problem: CapacityProblem,
}

impl CapacityResult {
    /// Structured text record: one `key = value` per line.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        writeln!(s, "value = {}", self.value).unwrap();
        writeln!(s, "residual = {}", self.residual).unwrap();
        writeln!(s, "iterations = {}", self.iterations).unwrap();
        if let Some(ex) = &self.extrapolation {
            for (k, (r, c)) in ex.pairs.iter().enumerate() {
                writeln!(s, "extrapolation.{k}.radius = {r}").unwrap();
                writeln!(s, "extrapolation.{k}.capacity = {c}").unwrap();
            }
            writeln!(s, "extrapolation.limit = {}", ex.limit).unwrap();
            writeln!(s, "extrapolation.unreliable = {}", ex.unreliable).unwrap();
        }
        s
    }
}

/// Discrete capacitary potential of a relative capacity problem.
pub fn solve_potential(prob: &CapacityProblem, opts: &SolverOptions) -> Result<(PotentialField, f64, usize)> {
    solve_potential_from(prob, opts, None)
}

/// As [`solve_potential`], starting the iteration from `initial` when it
/// lives on the same grid.
pub fn solve_potential_from(
    prob: &CapacityProblem,
    opts: &SolverOptions,
    initial: Option<&PotentialField>,
) -> Result<(PotentialField, f64, usize)> {
    let grid = *prob.grid();
    let init = initial.filter(|p| *p.grid() == grid).map(|p| p.values());
    let (values, stats) = solver::solve(&grid, &prob.states(), init, opts);
    if !stats.converged {
        return Err(Error::SolverDiverged { residual: stats.residual, iterations: stats.iterations });
    }
    let field = PotentialField::new(grid, values)?;
    record_bounds(&field);
    Ok((field, stats.residual, stats.iterations))
}

/// Bound on how far a solved potential may leave `[0, 1]`.
pub const MAX_PRINCIPLE_TOLERANCE: f64 = 1e-8;

static SOLVES: AtomicUsize = AtomicUsize::new(0);
static WORST_EXCESS_BITS: AtomicU64 = AtomicU64::new(0);

fn record_bounds(field: &PotentialField) {
    let (lo, hi) = field.min_max();
    let excess = (-lo).max(hi - 1.0).max(0.0);
    SOLVES.fetch_add(1, Ordering::Relaxed);
    // Non-negative floats order like their bit patterns.
    WORST_EXCESS_BITS.fetch_max(excess.to_bits(), Ordering::Relaxed);
    debug_assert!(excess <= MAX_PRINCIPLE_TOLERANCE, "potential leaves [0, 1] by {excess}");
}

/// Number of potentials solved in this process and the largest amount by
/// which any of them left `[0, 1]`.
pub fn max_principle_audit() -> (usize, f64) {
    (SOLVES.load(Ordering::Relaxed), f64::from_bits(WORST_EXCESS_BITS.load(Ordering::Relaxed)))
}

/// Face-based Dirichlet energy `h^{d-2} Σ (v_i - v_j)^2` over all faces with
/// at least one endpoint in `D`. Faces on the grid edge see an exterior zero.
pub fn dirichlet_energy(potential: &PotentialField, domain: &SetMask) -> f64 {
    let g = potential.grid();
    let v = potential.values();
    let dim = g.dim();
    let s = parallel::sum_by(g.n_cells(), |i| {
        let mut acc = 0.0;
        for axis in 0..dim {
            let plus = 2 * axis + 1;
            let minus = 2 * axis;
            match g.neighbor(i, plus) {
                Some(j) => {
                    if domain.get(i) || domain.get(j) {
                        acc += (v[i] - v[j]).powi(2);
                    }
                }
                None if domain.get(i) => acc += v[i] * v[i],
                None => {}
            }
            if g.neighbor(i, minus).is_none() && domain.get(i) {
                acc += v[i] * v[i];
            }
        }
        acc
    });
    s * g.spacing().powi(dim as i32 - 2)
}

/// `cap(E; D)` for a bounded open domain.
pub fn relative_capacity(prob: &CapacityProblem, opts: &SolverOptions) -> Result<CapacityResult> {
    relative_capacity_from(prob, opts, None)
}

/// [`relative_capacity`] warm-started from a previous potential.
pub fn relative_capacity_from(
    prob: &CapacityProblem,
    opts: &SolverOptions,
    initial: Option<&PotentialField>,
) -> Result<CapacityResult> {
    let (potential, residual, iterations) = solve_potential_from(prob, opts, initial)?;
    let value = dirichlet_energy(&potential, prob.domain());
    Ok(CapacityResult { value, potential, residual, iterations, extrapolation: None, problem: prob.clone() })
}

/// A compact set that can be rasterized on any grid.
pub trait CompactSet: Sync {
    fn dim(&self) -> usize;
    /// Centre and radius of a ball containing the set.
    fn bounding_ball(&self) -> ([f64; 3], f64);
    fn rasterize(&self, grid: &EulerianGrid) -> Result<SetMask>;
}

impl CompactSet for SetMask {
    fn dim(&self) -> usize {
        self.grid().dim()
    }

    fn bounding_ball(&self) -> ([f64; 3], f64) {
        let g = self.grid();
        let dim = g.dim();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in self.iter_occupied() {
            let c = g.center(i);
            for a in 0..dim {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let mut center = [0.0; 3];
        let mut r2 = 0.0;
        for a in 0..dim {
            center[a] = 0.5 * (lo[a] + hi[a]);
            r2 += (0.5 * (hi[a] - lo[a]) + 0.5 * g.spacing()).powi(2);
        }
        (center, r2.sqrt())
    }

    fn rasterize(&self, grid: &EulerianGrid) -> Result<SetMask> {
        self.resample(grid)
    }
}

/// Closed ball, rasterized by cell-centre sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub dim: usize,
    pub center: [f64; 3],
    pub radius: f64,
}

impl CompactSet for Ball {
    fn dim(&self) -> usize {
        self.dim
    }

    fn bounding_ball(&self) -> ([f64; 3], f64) {
        (self.center, self.radius)
    }

    fn rasterize(&self, grid: &EulerianGrid) -> Result<SetMask> {
        Ok(shapes::ball(*grid, MaskKind::Compact, &self.center[..self.dim], self.radius))
    }
}

/// Truncation radii and grid size for [`self_capacity`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCapacitySchedule {
    /// Truncation radii as multiples of the circumscribed radius of `E`,
    /// increasing.
    pub radius_factors: Vec<f64>,
    /// Cells per axis of every truncation grid.
    pub cells_per_axis: usize,
}

impl Default for SelfCapacitySchedule {
    fn default() -> Self {
        Self { radius_factors: vec![2.0, 4.0, 8.0], cells_per_axis: 96 }
    }
}

/// Grid for the truncation ball `B_R(center)`: `cells` per axis, two cells of
/// margin outside the ball.
pub fn truncation_grid(dim: usize, center: &[f64; 3], radius: f64, cells: usize) -> Result<EulerianGrid> {
    if cells < 8 {
        return Err(Error::InvalidArgument("truncation grids need at least 8 cells per axis".into()));
    }
    let h = 2.0 * radius / (cells - 4) as f64;
    let half = 0.5 * cells as f64 * h;
    let origin: Vec<f64> = center[..dim].iter().map(|c| c - half).collect();
    EulerianGrid::new(dim, &origin, h, &vec![cells; dim])
}

/// Self-capacity by exhaustion with balls of the given absolute radii.
///
/// Every `cap(E; B_R)` is an upper bound. Because
/// `1 / cap(E; B_R) = 1 / cap(E) - 1 / (4π R) + O(R^{-2})`, and exactly so for
/// a ball, the limit is the reciprocal of the least-squares intercept of
/// `1 / cap` against `1 / R` over the last three radii.
pub fn self_capacity(e: &dyn CompactSet, radii: &[f64], cells: usize, opts: &SolverOptions) -> Result<CapacityResult> {
    let dim = e.dim();
    if dim < 3 {
        return Err(Error::UnsupportedDimension(
            "self-capacity is defined for d >= 3; use a relative capacity in two dimensions".into(),
        ));
    }
    if radii.len() < 3 {
        return Err(Error::NeedThreeRadii);
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("truncation radii must increase".into()));
    }
    let (center, rad) = e.bounding_ball();
    if !(radii[0] > rad) {
        return Err(Error::InvalidArgument(format!(
            "smallest truncation radius {} does not exceed the conductor radius {rad}",
            radii[0]
        )));
    }
    let mut pairs = Vec::with_capacity(radii.len());
    let mut last = None;
    for &r in radii {
        let grid = truncation_grid(dim, &center, r, cells)?;
        let conductor = e.rasterize(&grid)?;
        let domain = shapes::ball(grid, MaskKind::Open, &center[..dim], r);
        let prob = CapacityProblem::new(conductor, domain)?;
        let res = relative_capacity(&prob, opts)?;
        pairs.push((r, res.value));
        last = Some(res);
    }
    let mut last = last.unwrap();
    let tail = &pairs[pairs.len() - 3..];
    let xs: Vec<f64> = tail.iter().map(|(r, _)| 1.0 / r).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, c)| 1.0 / c).collect();
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let intercept = my - (sxy / sxx) * mx;
    let slack = 2.0 * opts.tolerance;
    let mut unreliable = pairs.windows(2).any(|w| w[1].1 > w[0].1 * (1.0 + slack));
    let limit = if intercept > 0.0 {
        1.0 / intercept
    } else {
        unreliable = true;
        pairs.last().unwrap().1
    };
    last.value = limit;
    last.extrapolation = Some(Extrapolation { pairs, limit, unreliable });
    Ok(last)
}

/// [`self_capacity`] with radii taken from a schedule of factors times the
/// circumscribed radius of `E`.
pub fn self_capacity_scheduled(
    e: &dyn CompactSet,
    schedule: &SelfCapacitySchedule,
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    let (_, rad) = e.bounding_ball();
    let radii: Vec<f64> = schedule.radius_factors.iter().map(|f| f * rad).collect();
    self_capacity(e, &radii, schedule.cells_per_axis, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn annulus(h: f64, r: f64, big_r: f64) -> CapacityProblem {
        let g = EulerianGrid::covering(2, &[-big_r, -big_r], &[big_r, big_r], h).unwrap();
        let g = EulerianGrid::new(2, &[g.origin()[0] - 2.0 * h, g.origin()[1] - 2.0 * h], h, &[g.dims()[0] + 4, g.dims()[1] + 4]).unwrap();
        let e = shapes::ball(g, MaskKind::Compact, &[0.0, 0.0], r);
        let d = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], big_r);
        CapacityProblem::new(e, d).unwrap()
    }

    #[test]
    fn annulus_potential_matches_log_profile() {
        let prob = annulus(1.0 / 256.0, 0.25, 1.0);
        let (v, _, _) = solve_potential(&prob, &SolverOptions::default()).unwrap();
        let g = v.grid();
        let mut worst: f64 = 0.0;
        for i in 0..g.n_cells() {
            let p = g.center(i);
            let rho = p[0].hypot(p[1]);
            if prob.domain().get(i) && !prob.conductor().get(i) {
                let exact = (1.0 / rho).ln() / 4f64.ln();
                worst = worst.max((v.values()[i] - exact).abs());
            }
        }
        // Within 2% of the unit potential drop everywhere between the plates.
        assert!(worst < 0.02, "worst error {worst}");
    }

    #[test]
    fn maximum_principle() {
        let prob = annulus(1.0 / 64.0, 0.25, 1.0);
        let (v, _, _) = solve_potential(&prob, &SolverOptions::default()).unwrap();
        let (lo, hi) = v.min_max();
        assert!(lo >= -1e-8 && hi <= 1.0 + 1e-8);
        let free: Vec<f64> = (0..v.grid().n_cells())
            .filter(|&i| prob.domain().get(i) && !prob.conductor().get(i))
            .map(|i| v.values()[i])
            .collect();
        let (flo, fhi) = free.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(flo > 0.0 && fhi < 1.0);
    }

    #[test]
    fn thin_gap_behaves_like_parallel_plates() {
        // E = D minus a gap of `k` cells around it: capacity ≈ perimeter / gap.
        // Dirichlet values sit at cell centres, so the effective plate
        // distance is one cell wider than the geometric gap.
        let h = 1.0 / 128.0;
        let mut prev = 0.0;
        for k in [8usize, 4, 2] {
            let gap = k as f64 * h;
            let prob = annulus(h, 0.5 - gap, 0.5);
            let c = relative_capacity(&prob, &SolverOptions::default()).unwrap().value;
            let plates = 2.0 * PI * (0.5 - gap / 2.0) / (gap + h);
            assert!((c - plates).abs() / plates < 0.15, "gap {gap}: {c} vs {plates}");
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn conductor_touching_domain_complement_is_degenerate() {
        let h = 1.0 / 32.0;
        let g = EulerianGrid::covering(2, &[-1.1, -1.1], &[1.1, 1.1], h).unwrap();
        let e = shapes::ball(g, MaskKind::Compact, &[0.0, 0.0], 0.5);
        let d = shapes::ball(g, MaskKind::Open, &[0.0, 0.0], 0.5);
        assert!(matches!(CapacityProblem::new(e, d), Err(Error::DegenerateSeparation(_))));
    }

    #[test]
    fn records_are_key_value_lines() {
        let prob = annulus(1.0 / 32.0, 0.25, 1.0);
        let res = relative_capacity(&prob, &SolverOptions::default()).unwrap();
        let rec = res.to_record();
        assert!(rec.starts_with("value = "));
        assert_eq!(rec.lines().count(), 3);
    }

    #[test]
    fn self_capacity_rejects_two_dimensions_and_short_schedules() {
        let b2 = Ball { dim: 2, center: [0.0; 3], radius: 1.0 };
        assert!(matches!(self_capacity(&b2, &[2.0, 4.0, 8.0], 32, &SolverOptions::default()), Err(Error::UnsupportedDimension(_))));
        let b3 = Ball { dim: 3, center: [0.0; 3], radius: 1.0 };
        assert!(matches!(self_capacity(&b3, &[2.0, 4.0], 32, &SolverOptions::default()), Err(Error::NeedThreeRadii)));
    }
}
