//! Minimization of the electroelastic functionals over admissible
//! deformations.
//!
//! Both methods only ever accept candidates that strictly lower the fully
//! re-solved total energy, have positive determinants everywhere and no
//! overlapping cells. Clamped vertices are never decision variables. The
//! result is a numerically stationary point, not a certified minimizer.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::capacity::{boundary_flux_density, CapacityResult};
use crate::deformation::Deformation;
use crate::energy::{elastic_gradient, evaluate_near, Electrostatics, EnergyBreakdown, MaterialModel};
use crate::{Error, Reason, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PatternSearch,
    GradientHybrid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::PatternSearch => "pattern_search",
            Method::GradientHybrid => "gradient_hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "pattern_search" => Some(Method::PatternSearch),
            "gradient_hybrid" => Some(Method::GradientHybrid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Initial poll step, and the largest vertex displacement of a gradient step.
    pub initial_step: f64,
    pub step_shrink: f64,
    pub min_step: f64,
    /// Poll sweeps (pattern search) or line searches (gradient hybrid).
    pub max_iterations: usize,
    /// Candidates are screened against a frozen electrostatic term except on
    /// every `capacity_refresh`-th iteration. Acceptance always re-solves.
    pub capacity_refresh: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::GradientHybrid,
            initial_step: 0.02,
            step_shrink: 0.5,
            min_step: 1e-4,
            max_iterations: 200,
            capacity_refresh: 1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_step > 0.0 && self.min_step < self.initial_step) {
            return Err(Error::InvalidArgument("need 0 < min_step < initial_step".into()));
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(Error::InvalidArgument("need 0 < step_shrink < 1".into()));
        }
        if self.capacity_refresh == 0 {
            return Err(Error::InvalidArgument("capacity_refresh must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepConverged,
    IterationCap,
    Stagnation,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::StepConverged => "step_converged",
            Termination::IterationCap => "iteration_cap",
            Termination::Stagnation => "stagnation",
        }
    }
}

/// One accepted state. Iterate 0 is the start.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    pub step: f64,
    pub max_displacement: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub iterates: Vec<Iterate>,
    pub final_deformation: Deformation,
    pub termination: Termination,
    /// Number of candidates rejected, by reason.
    pub rejected: Vec<(Reason, usize)>,
}

impl Trajectory {
    pub fn accepted_steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn initial(&self) -> &EnergyBreakdown {
        &self.iterates[0].energy
    }

    pub fn last(&self) -> &EnergyBreakdown {
        &self.iterates.last().unwrap().energy
    }

    /// CSV with columns `iteration,elastic,capacity,electrostatic,total,step,max_displacement`.
    /// The capacity field is empty where it was not computed.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,elastic,capacity,electrostatic,total,step,max_displacement\n");
        for it in &self.iterates {
            let cap = it.energy.capacity_value.map_or(String::new(), |c| c.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                it.iteration, it.energy.elastic, cap, it.energy.electrostatic, it.energy.total, it.step, it.max_displacement
            );
        }
        s
    }

    /// Key-value summary of the run.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "termination = {}", self.termination.as_str());
        let _ = writeln!(s, "accepted_steps = {}", self.accepted_steps());
        let _ = writeln!(s, "initial_total = {}", self.initial().total);
        let _ = writeln!(s, "final_total = {}", self.last().total);
        let _ = writeln!(s, "final_elastic = {}", self.last().elastic);
        let cap = self.last().capacity_value.map_or("none".to_string(), |c| c.to_string());
        let _ = writeln!(s, "final_capacity = {cap}");
        for (reason, n) in &self.rejected {
            let _ = writeln!(s, "rejected.{} = {n}", reason.as_str());
        }
        s
    }
}

/// Shared evaluation state of one run.
struct Evaluator<'a> {
    model: &'a MaterialModel,
    setup: &'a Electrostatics,
    rejected: Vec<(Reason, usize)>,
}

impl Evaluator<'_> {
    fn reject(&mut self, reason: Reason) {
        match self.rejected.iter_mut().find(|(r, _)| *r == reason) {
            Some((_, n)) => *n += 1,
            None => self.rejected.push((reason, 1)),
        }
    }

    /// Fully evaluated candidate, if it is admissible and strictly better
    /// than `current`. Capacity is skipped for zero charge.
    fn try_accept(
        &mut self,
        cand: &Deformation,
        current: &EnergyBreakdown,
        frozen: bool,
    ) -> Result<Option<EnergyBreakdown>> {
        if frozen {
            // Screening: elastic term plus the electrostatic term of the
            // current state.
            let el = crate::energy::elastic_energy(cand, self.model);
            if !(el + current.electrostatic < current.total) {
                return Ok(None);
            }
        }
        let b = evaluate_near(cand, self.model, self.setup, false, Some(current))?;
        if let Some(reason) = b.reason {
            self.reject(reason);
            return Ok(None);
        }
        if b.admissibility.overlap_cells > 0 {
            self.reject(Reason::Overlap);
            return Ok(None);
        }
        Ok(if b.total < current.total { Some(b) } else { None })
    }
}

/// Electrostatic shape force `-∂/∂y [Q² / (2 cap)]` at conductor-interface
/// vertices: `Q² / (2 cap²)` times the squared potential gradient near each
/// deformed interface facet, times the facet's outward area vector, shared
/// equally among its vertices.
pub fn electrostatic_force(def: &Deformation, charge: f64, cap: &CapacityResult) -> Vec<[f64; 3]> {
    let domain = def.domain();
    let dim = def.dim();
    let mut force = vec![[0.0; 3]; domain.n_vertices()];
    if charge == 0.0 {
        return force;
    }
    let faces = boundary_flux_density(cap);
    if faces.is_empty() {
        return force;
    }
    let h = cap.potential.grid().spacing();
    let scale = charge * charge / (2.0 * cap.value * cap.value);
    let pos = def.positions();
    for (facet, opposite) in domain.interface_facets() {
        let p: Vec<[f64; 3]> = facet.iter().map(|&v| pos[v]).collect();
        let mut mid = [0.0; 3];
        for q in &p {
            for a in 0..3 {
                mid[a] += q[a] / facet.len() as f64;
            }
        }
        // Area-weighted normal.
        let mut n = if dim == 2 {
            [p[1][1] - p[0][1], -(p[1][0] - p[0][0]), 0.0]
        } else {
            let u = [0, 1, 2].map(|a| p[1][a] - p[0][a]);
            let w = [0, 1, 2].map(|a| p[2][a] - p[0][a]);
            [
                0.5 * (u[1] * w[2] - u[2] * w[1]),
                0.5 * (u[2] * w[0] - u[0] * w[2]),
                0.5 * (u[0] * w[1] - u[1] * w[0]),
            ]
        };
        let inward: f64 = (0..dim).map(|a| (pos[opposite][a] - mid[a]) * n[a]).sum();
        if inward > 0.0 {
            n = n.map(|c| -c);
        }
        // Mean density of grid faces near the facet midpoint.
        let dist2 = |f: &crate::capacity::BoundaryFace| (0..dim).map(|a| (f.position[a] - mid[a]).powi(2)).sum::<f64>();
        let near: Vec<f64> = faces.iter().filter(|f| dist2(f) <= (1.5 * h).powi(2)).map(|f| f.density).collect();
        let rho = if near.is_empty() {
            faces.iter().min_by(|a, b| dist2(a).total_cmp(&dist2(b))).unwrap().density
        } else {
            near.iter().sum::<f64>() / near.len() as f64
        };
        for &v in &facet {
            if domain.is_clamped(v) {
                continue;
            }
            for a in 0..dim {
                force[v][a] += scale * rho * n[a] / facet.len() as f64;
            }
        }
    }
    force
}

/// Descent candidate: `-(∇ elastic) + electrostatic force`, zero on `Γ0`.
/// With zero charge this is exactly the negative elastic gradient.
pub fn gradient_step_direction(
    def: &Deformation,
    model: &MaterialModel,
    charge: f64,
    cap: Option<&CapacityResult>,
) -> Result<Vec<[f64; 3]>> {
    let mut d: Vec<[f64; 3]> = elastic_gradient(def, model)?.into_iter().map(|g| g.map(|c| -c)).collect();
    if let Some(cap) = cap {
        for (row, f) in d.iter_mut().zip(electrostatic_force(def, charge, cap)) {
            for a in 0..3 {
                row[a] += f[a];
            }
        }
    }
    for &v in def.domain().gamma0() {
        d[v] = [0.0; 3];
    }
    Ok(d)
}

fn max_norm(d: &[[f64; 3]]) -> f64 {
    d.iter().map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()).fold(0.0, f64::max)
}

fn displaced(def: &Deformation, dir: &[[f64; 3]], t: f64) -> Deformation {
    let mut out = def.clone();
    let dim = def.dim();
    for (v, d) in dir.iter().enumerate() {
        if def.domain().is_clamped(v) {
            continue;
        }
        let mut p = def.positions()[v];
        for a in 0..dim {
            p[a] += t * d[a];
        }
        out.set_position(v, p).expect("free vertex");
    }
    out
}

fn strip(mut b: EnergyBreakdown) -> EnergyBreakdown {
    b.capacity = None;
    b
}

/// Minimizes the functional from `def0`.
///
/// Errors: `Inadmissible` if `def0` has a nonpositive determinant;
/// `InfeasibleStart` if its energy is `+inf` for another reason.
pub fn minimize(
    def0: &Deformation,
    model: &MaterialModel,
    setup: &Electrostatics,
    cfg: &OptimizerConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let start = crate::energy::total_energy(def0, model, setup)?;
    if !start.admissibility.all_dets_positive {
        let (element, det) = crate::deformation::element_gradients(def0)
            .iter()
            .enumerate()
            .map(|(e, f)| (e, f.determinant()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        return Err(Error::Inadmissible { element, det });
    }
    if let Some(reason) = start.reason {
        return Err(Error::InfeasibleStart(reason));
    }
    if start.admissibility.overlap_cells > 0 {
        return Err(Error::InfeasibleStart(Reason::Overlap));
    }

    let mut ev = Evaluator { model, setup, rejected: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = def0.clone();
    let mut energy = start.clone();
    let mut iterates = vec![Iterate { iteration: 0, energy: strip(start), step: 0.0, max_displacement: 0.0 }];
    let free: Vec<usize> = (0..def0.domain().n_vertices()).filter(|&v| !def0.domain().is_clamped(v)).collect();
    let dim = def0.dim();
    let mut step = cfg.initial_step;
    let mut termination = Termination::IterationCap;
    let mut prev_dir: Option<Vec<[f64; 3]>> = None;
    let mut prev_grad: Option<Vec<[f64; 3]>> = None;
    let mut stalled = 0usize;

    for it in 1..=cfg.max_iterations {
        let frozen = cfg.capacity_refresh > 1 && it % cfg.capacity_refresh != 0;
        let before = energy.total.value().unwrap();
        let mut progressed = false;

        if cfg.method == Method::GradientHybrid {
            let steepest = gradient_step_direction(&current, model, setup.charge, energy.capacity.as_ref())?;
            // Polak-Ribière+ conjugate direction, restarted when it is not a
            // descent direction for the smooth part.
            let mut dir = steepest.clone();
            if let (Some(pd), Some(pg)) = (&prev_dir, &prev_grad) {
                let num: f64 = steepest.iter().zip(pg).map(|(g, q)| (0..dim).map(|a| g[a] * (g[a] - q[a])).sum::<f64>()).sum();
                let den: f64 = pg.iter().map(|q| (0..dim).map(|a| q[a] * q[a]).sum::<f64>()).sum();
                let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
                for (d, p) in dir.iter_mut().zip(pd) {
                    for a in 0..dim {
                        d[a] += beta * p[a];
                    }
                }
                let slope: f64 = dir.iter().zip(&steepest).map(|(d, g)| (0..dim).map(|a| d[a] * g[a]).sum::<f64>()).sum();
                if slope <= 0.0 {
                    dir = steepest.clone();
                }
            }
            let norm = max_norm(&dir);
            if norm > 0.0 {
                let mut t = (2.0 * step).min(cfg.initial_step);
                while t >= cfg.min_step {
                    let cand = displaced(&current, &dir, t / norm);
                    if let Some(b) = ev.try_accept(&cand, &energy, frozen)? {
                        iterates.push(Iterate { iteration: it, energy: strip(b.clone()), step: t, max_displacement: t });
                        current = cand;
                        energy = b;
                        step = t;
                        progressed = true;
                        break;
                    }
                    t *= cfg.step_shrink;
                }
            }
            prev_grad = Some(steepest);
            prev_dir = if progressed { Some(dir) } else { None };
        }

        if !progressed {
            // Opportunistic coordinate poll over a random subset of free vertices.
            let mut order = free.clone();
            order.shuffle(&mut rng);
            let k = ((free.len() as f64).sqrt().ceil() as usize).max(1).min(free.len());
            for &v in &order[..k] {
                'dirs: for a in 0..dim {
                    for sign in [1.0, -1.0] {
                        let mut cand = current.clone();
                        let mut p = current.positions()[v];
                        p[a] += sign * step;
                        cand.set_position(v, p)?;
                        if let Some(b) = ev.try_accept(&cand, &energy, frozen)? {
                            iterates.push(Iterate { iteration: it, energy: strip(b.clone()), step, max_displacement: step });
                            current = cand;
                            energy = b;
                            progressed = true;
                            break 'dirs;
                        }
                    }
                }
            }
            if !progressed {
                step *= cfg.step_shrink;
                if step < cfg.min_step {
                    termination = Termination::StepConverged;
                    break;
                }
            }
            prev_dir = None;
        }

        let after = energy.total.value().unwrap();
        if progressed && before - after <= 1e-14 * before.abs().max(1e-300) {
            stalled += 1;
            if stalled >= 20 {
                termination = Termination::Stagnation;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    // The last record carries the capacity even when iterations skipped it.
    if iterates.len() > 1 && iterates.last().unwrap().energy.capacity_value.is_none() {
        let full = crate::energy::total_energy(&current, model, setup)?;
        if full.reason.is_none() {
            let last = iterates.last_mut().unwrap();
            last.energy.capacity_value = full.capacity_value;
        }
    }
    Ok(Trajectory { iterates, final_deformation: current, termination, rejected: ev.rejected })
}
