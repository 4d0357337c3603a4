//! Randomized monotonicity trials for the relative capacity in two
//! dimensions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{PropertyReport, TrialRecord};
use crate::capacity::{relative_capacity_from, CapacityProblem, CapacityResult, SolverOptions};
use crate::geometry::{thicken, thin, EulerianGrid, MaskKind, SetMask};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneProperty {
    /// `E1 ⊆ E2` implies `cap(E1; D) <= cap(E2; D)`.
    NestedCompacts,
    /// `D1 ⊆ D2` implies `cap(E; D2) <= cap(E; D1)`.
    NestedDomains,
    /// Thickenings `E^ε` decrease to `E` and their capacities to `cap(E; D)`.
    ThickeningChain,
    /// Erosions of `E` increase to `E` and their capacities to `cap(E; D)`.
    ErosionChain,
    /// Thinnings `D_ε` increase to `D` and `cap(E; D_ε)` decreases to `cap(E; D)`.
    ThinningChain,
}

impl MonotoneProperty {
    pub const ALL: [MonotoneProperty; 5] = [
        MonotoneProperty::NestedCompacts,
        MonotoneProperty::NestedDomains,
        MonotoneProperty::ThickeningChain,
        MonotoneProperty::ErosionChain,
        MonotoneProperty::ThinningChain,
    ];

    pub fn id(self) -> &'static str {
        match self {
            MonotoneProperty::NestedCompacts => "monotone.compact",
            MonotoneProperty::NestedDomains => "monotone.domain",
            MonotoneProperty::ThickeningChain => "monotone.thickening",
            MonotoneProperty::ErosionChain => "monotone.erosion",
            MonotoneProperty::ThinningChain => "monotone.thinning",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.id() == s)
    }
}

#[derive(Debug, Clone)]
pub struct MonotonicitySetup {
    /// Two-dimensional grid; random sets live in `[-0.9, 0.9]²`.
    pub grid: EulerianGrid,
    pub trials: usize,
    pub seed: u64,
    /// First radius of the chains; later ones halve it.
    pub eps0: f64,
    /// Chain members `ε_0, ..., ε_{chain_len - 1}`.
    pub chain_len: usize,
    /// Relative tolerance of the comparisons.
    pub tolerance: f64,
    pub solver: SolverOptions,
}

impl Default for MonotonicitySetup {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            grid: EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], 1.0 / 128.0).unwrap(),
            trials: 100,
            seed: 0,
            eps0: 0.05,
            chain_len: 6,
            tolerance: 2.0 * solver.tolerance,
            solver,
        }
    }
}

impl MonotonicitySetup {
    fn eps(&self, k: usize) -> f64 {
        self.eps0 * 0.5f64.powi(k as i32)
    }

    fn validate(&self) -> Result<()> {
        if self.grid.dim() != 2 {
            return Err(Error::UnsupportedDimension("monotonicity trials are two-dimensional".into()));
        }
        let lo = self.grid.origin();
        let hi = self.grid.upper_corner();
        if lo[0] > -0.95 || lo[1] > -0.95 || hi[0] < 0.95 || hi[1] < 0.95 {
            return Err(Error::InvalidArgument("grid must cover [-0.95, 0.95]²".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        if self.chain_len < 2 || !(self.eps0 > 0.0) {
            return Err(Error::InvalidArgument("chains need eps0 > 0 and at least two members".into()));
        }
        Ok(())
    }
}

/// Union of disks.
#[derive(Debug, Clone)]
struct Blob(Vec<([f64; 2], f64)>);

impl Blob {
    fn random(rng: &mut ChaCha8Rng, count: (usize, usize), center: f64, radius: (f64, f64)) -> Blob {
        let n = rng.gen_range(count.0..=count.1);
        Blob(
            (0..n)
                .map(|_| {
                    let c = [rng.gen_range(-center..=center), rng.gen_range(-center..=center)];
                    (c, rng.gen_range(radius.0..=radius.1))
                })
                .collect(),
        )
    }

    fn mask(&self, grid: EulerianGrid, kind: MaskKind) -> SetMask {
        let disks = self.0.clone();
        SetMask::from_fn(grid, kind, move |p| {
            disks.iter().any(|(c, r)| {
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                match kind {
                    MaskKind::Compact => d2 <= r * r,
                    MaskKind::Open => d2 < r * r,
                }
            })
        })
    }
}

fn conductor(setup: &MonotonicitySetup, rng: &mut ChaCha8Rng) -> Blob {
    let h = setup.grid.spacing();
    Blob::random(rng, (1, 4), 0.4, (4.0 * h, 0.2))
}

/// `E` thickened by a random margin of at least `min_margin`, united with up
/// to two larger disks.
fn domain(setup: &MonotonicitySetup, rng: &mut ChaCha8Rng, e: &SetMask, min_margin: f64) -> Result<SetMask> {
    let margin = rng.gen_range(min_margin..=min_margin.max(0.3));
    let extra = Blob::random(rng, (0, 2), 0.4, (0.2, 0.5));
    let d = thicken(e, margin)?.with_kind(MaskKind::Open);
    d.union(&extra.mask(setup.grid, MaskKind::Open))
}

fn solve(e: &SetMask, d: &SetMask, opts: &SolverOptions, warm: Option<&CapacityResult>) -> Result<CapacityResult> {
    relative_capacity_from(&CapacityProblem::new(e.clone(), d.clone())?, opts, warm.map(|c| &c.potential))
}

/// Relative excess of `lhs` over `rhs`.
fn excess(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs) / scale
    }
}

struct Tally {
    excess: f64,
    violations: usize,
    tol: f64,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Tally { excess: f64::NEG_INFINITY, violations: 0, tol }
    }

    /// Records the claim `lhs <= rhs`.
    fn le(&mut self, lhs: f64, rhs: f64) {
        let x = excess(lhs, rhs);
        self.excess = self.excess.max(x);
        if x > self.tol {
            self.violations += 1;
        }
    }

    /// Records the claim `lhs == rhs`.
    fn eq(&mut self, lhs: f64, rhs: f64) {
        self.le(lhs, rhs);
        self.le(rhs, lhs);
    }

    fn fail(&mut self) {
        self.violations += 1;
    }
}

/// Outcome of one trial: record plus the limit gap for chain properties.
type Trial = (TrialRecord, Option<f64>);

fn run_trial(setup: &MonotonicitySetup, prop: MonotoneProperty, rng: &mut ChaCha8Rng, trial: usize) -> Result<Trial> {
    let g = setup.grid;
    let h = g.spacing();
    let opts = &setup.solver;
    let mut t = Tally::new(setup.tolerance);
    let mut values = Vec::new();
    let mut gap = None;
    match prop {
        MonotoneProperty::NestedCompacts => {
            let big = conductor(setup, rng);
            let small = if rng.gen_bool(0.25) {
                big.clone()
            } else {
                let keep: Vec<_> = big.0.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
                if keep.is_empty() {
                    Blob(vec![big.0[0]])
                } else {
                    Blob(keep)
                }
            };
            let e2 = big.mask(g, MaskKind::Compact);
            let e1 = small.mask(g, MaskKind::Compact);
            let d = domain(setup, rng, &e2, 3.0 * h)?;
            let c1 = solve(&e1, &d, opts, None)?.value;
            let c2 = solve(&e2, &d, opts, None)?.value;
            t.le(c1, c2);
            values = vec![c1, c2];
        }
        MonotoneProperty::NestedDomains => {
            let e = conductor(setup, rng).mask(g, MaskKind::Compact);
            let d1 = domain(setup, rng, &e, 3.0 * h)?;
            let extra = Blob::random(rng, (1, 2), 0.4, (0.2, 0.5));
            let d2 = d1.union(&extra.mask(g, MaskKind::Open))?;
            let c1 = solve(&e, &d1, opts, None)?.value;
            let c2 = solve(&e, &d2, opts, None)?.value;
            t.le(c2, c1);
            values = vec![c1, c2];
        }
        MonotoneProperty::ThickeningChain => {
            let e = conductor(setup, rng).mask(g, MaskKind::Compact);
            let d = domain(setup, rng, &e, setup.eps0 + 3.0 * h)?;
            let direct = solve(&e, &d, opts, None)?;
            let mut prev: Option<CapacityResult> = None;
            for k in 0..setup.chain_len {
                let ek = thicken(&e, setup.eps(k))?;
                let c = solve(&ek, &d, opts, prev.as_ref())?;
                if let Some(p) = &prev {
                    t.le(c.value, p.value);
                }
                t.le(direct.value, c.value);
                if setup.eps(k) < 0.5 * h {
                    if ek != e {
                        t.fail();
                    }
                    t.eq(c.value, direct.value);
                }
                values.push(c.value);
                prev = Some(c);
            }
            gap = Some(prev.unwrap().value - direct.value);
            values.push(direct.value);
        }
        MonotoneProperty::ErosionChain => {
            let e = conductor(setup, rng).mask(g, MaskKind::Compact);
            let d = domain(setup, rng, &e, 3.0 * h)?;
            let direct = solve(&e, &d, opts, None)?;
            let mut prev: Option<CapacityResult> = None;
            let mut prev_value = 0.0;
            for k in 0..setup.chain_len {
                let ek = thin(&e, setup.eps(k))?.with_kind(MaskKind::Compact);
                let c = if ek.is_empty() {
                    0.0
                } else {
                    let r = solve(&ek, &d, opts, prev.as_ref())?;
                    let v = r.value;
                    prev = Some(r);
                    v
                };
                t.le(prev_value, c);
                t.le(c, direct.value);
                if setup.eps(k) < 0.5 * h {
                    if ek != e {
                        t.fail();
                    }
                    t.eq(c, direct.value);
                }
                values.push(c);
                prev_value = c;
            }
            gap = Some(prev_value - direct.value);
            values.push(direct.value);
        }
        MonotoneProperty::ThinningChain => {
            let e = conductor(setup, rng).mask(g, MaskKind::Compact);
            let d = domain(setup, rng, &e, setup.eps0 + 3.0 * h)?;
            let direct = solve(&e, &d, opts, None)?;
            let mut prev: Option<CapacityResult> = None;
            for k in 0..setup.chain_len {
                let dk = thin(&d, setup.eps(k))?;
                let c = solve(&e, &dk, opts, prev.as_ref())?;
                if let Some(p) = &prev {
                    t.le(c.value, p.value);
                }
                t.le(direct.value, c.value);
                if setup.eps(k) < 0.5 * h {
                    if dk != d {
                        t.fail();
                    }
                    t.eq(c.value, direct.value);
                }
                values.push(c.value);
                prev = Some(c);
            }
            gap = Some(prev.unwrap().value - direct.value);
            values.push(direct.value);
        }
    }
    Ok((TrialRecord { trial, values, excess: t.excess, violations: t.violations }, gap))
}

/// Trial with resampling of instances whose separation fails.
fn trial_with_retries(setup: &MonotonicitySetup, prop: MonotoneProperty, trial: usize) -> Result<Trial> {
    let stream = (prop as u64) << 32 | trial as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    rng.set_stream(stream);
    for _ in 0..1000 {
        match run_trial(setup, prop, &mut rng, trial) {
            Err(Error::DegenerateSeparation(_) | Error::EmptySet | Error::BoundaryClipped) => continue,
            other => return other,
        }
    }
    Err(Error::InvalidArgument(format!("no admissible random instance found for {}", prop.id())))
}

/// One report per requested property, each over `setup.trials` seeded random
/// instances. Chain reports carry the largest limit gap at the finest member
/// as the note `limit_gap`.
pub fn check_monotonicity_suite(setup: &MonotonicitySetup, props: &[MonotoneProperty]) -> Result<Vec<PropertyReport>> {
    setup.validate()?;
    let mut reports = Vec::with_capacity(props.len());
    for &prop in props {
        let trials: Vec<Trial> =
            (0..setup.trials).into_par_iter().map(|k| trial_with_retries(setup, prop, k)).collect::<Result<_>>()?;
        let mut report = PropertyReport::new(prop.id(), setup.tolerance);
        let mut worst_gap: Option<f64> = None;
        for (record, gap) in trials {
            if let Some(g) = gap {
                worst_gap = Some(worst_gap.map_or(g, |w: f64| if g.abs() > w.abs() { g } else { w }));
            }
            report.push(record);
        }
        report.note("spacing", setup.grid.spacing());
        if let Some(g) = worst_gap {
            let eps: Vec<String> = (0..setup.chain_len).map(|k| setup.eps(k).to_string()).collect();
            report.note("chain_eps", eps.join(";"));
            report.note("limit_gap", g);
        }
        reports.push(report);
    }
    Ok(reports)
}
