//! Scenario configuration: TOML with dotted keys, validated field by field
//! before any computation starts.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use electroelastic::capacity::{Preconditioner, SelfCapacitySchedule, SolverOptions};
use electroelastic::deformation::{demo, Bump, Deformation, ReferenceDomain};
use electroelastic::energy::{Electrostatics, FunctionalKind, MaterialModel, MaterialParams};
use electroelastic::geometry::{io as gio, shapes, EulerianGrid, MaskKind, SetMask};
use electroelastic::optimize::{Method, OptimizerConfig};
use electroelastic::verify::{KochSetup, MonotonicitySetup};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub electrostatics: ElectrostaticsSection,
    pub grid: GridSection,
    pub self_capacity: SelfCapacitySection,
    pub solver: SolverSection,
    pub optimizer: OptimizerSection,
    pub start: StartSection,
    pub capacity: CapacitySection,
    pub monotonicity: MonotonicitySection,
    pub koch: KochSection,
    pub sequence: SequenceSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    /// Built-in mesh: `disk-in-disk` (the default), `disk-in-square` or
    /// `ball-in-cube`.
    pub demo: Option<String>,
    /// Mesh file; relative paths resolve against the config file.
    pub path: Option<PathBuf>,
    pub level: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { demo: None, path: None, level: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub load: Vec<f64>,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, c: 1.0, load: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub q: f64,
    pub s: f64,
    pub conductor: RegionSection,
    pub insulator: RegionSection,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            q: 3.0,
            s: 2.0,
            conductor: RegionSection::default(),
            insulator: RegionSection { a: 0.5, b: 0.5, c: 0.5, load: Vec::new() },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectrostaticsSection {
    pub functional: String,
    pub charge: f64,
}

impl Default for ElectrostaticsSection {
    fn default() -> Self {
        Self { functional: "F2".into(), charge: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Empty means `-1.1` on every axis.
    pub lo: Vec<f64>,
    /// Empty means `1.1` on every axis.
    pub hi: Vec<f64>,
    pub h: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { lo: Vec::new(), hi: Vec::new(), h: 1.0 / 128.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfCapacitySection {
    pub radius_factors: Vec<f64>,
    pub cells_per_axis: usize,
}

impl Default for SelfCapacitySection {
    fn default() -> Self {
        let s = SelfCapacitySchedule::default();
        Self { radius_factors: s.radius_factors, cells_per_axis: s.cells_per_axis }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance: f64,
    pub cap_factor: f64,
    pub preconditioner: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        Self { tolerance: s.tolerance, cap_factor: s.cap_factor, preconditioner: "multigrid".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub method: String,
    pub initial_step: f64,
    pub step_shrink: f64,
    pub min_step: f64,
    pub max_iterations: usize,
    pub capacity_refresh: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        Self {
            method: c.method.as_str().into(),
            initial_step: c.initial_step,
            step_shrink: c.step_shrink,
            min_step: c.min_step,
            max_iterations: c.max_iterations,
            capacity_refresh: c.capacity_refresh,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BumpSection {
    /// Empty means the origin.
    #[serde(default)]
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StartSection {
    /// Deformation file; takes precedence over `bump`.
    pub deformation: Option<PathBuf>,
    pub bump: Option<BumpSection>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "shape", rename_all = "snake_case")]
pub enum ShapeSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Polygon { vertices: Vec<[f64; 2]> },
    Mask { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySection {
    /// Conductor for a standalone capacity computation. Without it the
    /// capacity of the deformed mesh is computed.
    pub conductor: Option<ShapeSpec>,
    /// Enclosing domain; without it the self-capacity of `conductor` is
    /// computed (three dimensions only).
    pub domain: Option<ShapeSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonotonicitySection {
    pub trials: usize,
    pub h: f64,
    pub eps0: f64,
    pub chain_len: usize,
}

impl Default for MonotonicitySection {
    fn default() -> Self {
        let m = MonotonicitySetup::default();
        Self { trials: m.trials, h: m.grid.spacing(), eps0: m.eps0, chain_len: m.chain_len }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KochSection {
    pub side: f64,
    pub max_level: usize,
    pub h: f64,
    pub enclosing_radius: f64,
}

impl Default for KochSection {
    fn default() -> Self {
        let k = KochSetup::default();
        Self { side: k.side, max_level: k.max_level, h: k.grid.spacing(), enclosing_radius: k.enclosing_radius }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub bump: BumpSection,
    pub decay: f64,
    pub n_max: usize,
    pub regularity_b: f64,
    pub regularity_r0: f64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            bump: BumpSection { center: Vec::new(), radius: 0.5, amplitude: 0.05, direction: Vec::new() },
            decay: 0.5,
            n_max: 8,
            regularity_b: 0.15,
            regularity_r0: 0.0625,
        }
    }
}

/// Loaded configuration plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
    pub domain: Arc<ReferenceDomain>,
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {x}")))
    }
}

fn vec_len(field: &str, v: &[f64], dim: usize) -> Result<(), CliError> {
    if v.len() != dim {
        return Err(bad(field, format!("needs {dim} components, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad(field, "components must be finite"));
    }
    Ok(())
}

fn pad3(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(v);
    out
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn functional(&self) -> Result<FunctionalKind, CliError> {
        match self.electrostatics.functional.as_str() {
            "F1" => Ok(FunctionalKind::F1),
            "F2" => Ok(FunctionalKind::F2),
            other => Err(bad("electrostatics.functional", format!("expected F1 or F2, got `{other}`"))),
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let s = &self.solver;
        positive("solver.tolerance", s.tolerance)?;
        positive("solver.cap_factor", s.cap_factor)?;
        let preconditioner = match s.preconditioner.as_str() {
            "multigrid" => Preconditioner::Multigrid,
            "diagonal" => Preconditioner::Diagonal,
            other => return Err(bad("solver.preconditioner", format!("expected multigrid or diagonal, got `{other}`"))),
        };
        Ok(SolverOptions { tolerance: s.tolerance, cap_factor: s.cap_factor, preconditioner })
    }

    pub fn grid(&self, dim: usize) -> Result<EulerianGrid, CliError> {
        let g = &self.grid;
        let lo = if g.lo.is_empty() { vec![-1.1; dim] } else { g.lo.clone() };
        let hi = if g.hi.is_empty() { vec![1.1; dim] } else { g.hi.clone() };
        vec_len("grid.lo", &lo, dim)?;
        vec_len("grid.hi", &hi, dim)?;
        positive("grid.h", g.h)?;
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(bad("grid.hi", "must exceed grid.lo componentwise"));
        }
        EulerianGrid::covering(dim, &lo, &hi, g.h).map_err(|e| bad("grid", e))
    }

    pub fn schedule(&self) -> Result<SelfCapacitySchedule, CliError> {
        let s = &self.self_capacity;
        if s.radius_factors.len() < 3 {
            return Err(bad("self_capacity.radius_factors", "needs at least three factors"));
        }
        if s.radius_factors.iter().any(|f| !(*f > 1.0)) || s.radius_factors.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("self_capacity.radius_factors", "factors must exceed 1 and increase"));
        }
        if s.cells_per_axis < 8 {
            return Err(bad("self_capacity.cells_per_axis", "must be at least 8"));
        }
        Ok(SelfCapacitySchedule { radius_factors: s.radius_factors.clone(), cells_per_axis: s.cells_per_axis })
    }

    pub fn material(&self, dim: usize) -> Result<MaterialModel, CliError> {
        let m = &self.material;
        let d = dim as f64;
        if !(m.q > d) {
            return Err(bad("material.q", format!("must exceed the dimension {dim}, got {}", m.q)));
        }
        if !(m.s > d - 1.0) {
            return Err(bad("material.s", format!("must exceed {}, got {}", dim - 1, m.s)));
        }
        let region = |name: &str, r: &RegionSection| -> Result<MaterialParams, CliError> {
            for (k, v) in [("a", r.a), ("b", r.b), ("c", r.c)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(bad(&format!("material.{name}.{k}"), format!("must be nonnegative, got {v}")));
                }
            }
            if !(r.a > 0.0) {
                return Err(bad(&format!("material.{name}.a"), "must be positive"));
            }
            if !(r.b > 0.0) {
                return Err(bad(&format!("material.{name}.b"), "must be positive"));
            }
            let mut p = MaterialParams::new(r.a, r.b, r.c);
            if !r.load.is_empty() {
                vec_len(&format!("material.{name}.load"), &r.load, dim)?;
                p.load = pad3(&r.load);
            }
            Ok(p)
        };
        Ok(MaterialModel {
            conductor: region("conductor", &m.conductor)?,
            insulator: region("insulator", &m.insulator)?,
            q: m.q,
            s: m.s,
        })
    }

    pub fn electrostatics(&self, dim: usize) -> Result<Electrostatics, CliError> {
        let charge = self.electrostatics.charge;
        if !(charge >= 0.0 && charge.is_finite()) {
            return Err(bad("electrostatics.charge", format!("must be nonnegative and finite, got {charge}")));
        }
        let kind = self.functional()?;
        if kind == FunctionalKind::F1 && dim != 3 {
            return Err(bad("electrostatics.functional", "F1 needs a three-dimensional mesh"));
        }
        Ok(Electrostatics {
            charge,
            kind,
            grid: self.grid(dim)?,
            schedule: self.schedule()?,
            solver: self.solver_options()?,
        })
    }

    pub fn optimizer(&self, seed: u64) -> Result<OptimizerConfig, CliError> {
        let o = &self.optimizer;
        let method = Method::parse(&o.method)
            .ok_or_else(|| bad("optimizer.method", format!("expected pattern_search or gradient_hybrid, got `{}`", o.method)))?;
        positive("optimizer.initial_step", o.initial_step)?;
        positive("optimizer.min_step", o.min_step)?;
        if !(o.min_step < o.initial_step) {
            return Err(bad("optimizer.min_step", "must be smaller than optimizer.initial_step"));
        }
        if !(o.step_shrink > 0.0 && o.step_shrink < 1.0) {
            return Err(bad("optimizer.step_shrink", "must lie in (0, 1)"));
        }
        if o.capacity_refresh == 0 {
            return Err(bad("optimizer.capacity_refresh", "must be at least 1"));
        }
        Ok(OptimizerConfig {
            method,
            initial_step: o.initial_step,
            step_shrink: o.step_shrink,
            min_step: o.min_step,
            max_iterations: o.max_iterations,
            capacity_refresh: o.capacity_refresh,
            seed,
        })
    }

    pub fn bump(field: &str, b: &BumpSection, dim: usize) -> Result<Bump, CliError> {
        if !b.center.is_empty() {
            vec_len(&format!("{field}.center"), &b.center, dim)?;
        }
        positive(&format!("{field}.radius"), b.radius)?;
        if !b.amplitude.is_finite() {
            return Err(bad(&format!("{field}.amplitude"), "must be finite"));
        }
        if !b.direction.is_empty() {
            vec_len(&format!("{field}.direction"), &b.direction, dim)?;
        }
        Ok(Bump { center: pad3(&b.center), radius: b.radius, amplitude: b.amplitude, direction: pad3(&b.direction) })
    }

    pub fn monotonicity(&self, seed: u64, solver: SolverOptions) -> Result<MonotonicitySetup, CliError> {
        let m = &self.monotonicity;
        positive("monotonicity.h", m.h)?;
        positive("monotonicity.eps0", m.eps0)?;
        if m.trials == 0 {
            return Err(bad("monotonicity.trials", "must be at least 1"));
        }
        if m.chain_len < 2 {
            return Err(bad("monotonicity.chain_len", "must be at least 2"));
        }
        let grid = EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], m.h).map_err(|e| bad("monotonicity.h", e))?;
        Ok(MonotonicitySetup {
            grid,
            trials: m.trials,
            seed,
            eps0: m.eps0,
            chain_len: m.chain_len,
            tolerance: 2.0 * solver.tolerance,
            solver,
        })
    }

    pub fn koch(&self, solver: SolverOptions) -> Result<KochSetup, CliError> {
        let k = &self.koch;
        positive("koch.side", k.side)?;
        positive("koch.h", k.h)?;
        positive("koch.enclosing_radius", k.enclosing_radius)?;
        if !(k.enclosing_radius > k.side / 3f64.sqrt()) {
            return Err(bad("koch.enclosing_radius", "must exceed the circumradius side/sqrt(3)"));
        }
        let r = k.enclosing_radius + 2.0 * k.h;
        let grid = EulerianGrid::covering(2, &[-r, -r], &[r, r], k.h).map_err(|e| bad("koch.h", e))?;
        Ok(KochSetup {
            side: k.side,
            max_level: k.max_level,
            grid,
            enclosing_radius: k.enclosing_radius,
            solver,
            ..KochSetup::default()
        })
    }

    pub fn sequence_checked(&self, dim: usize) -> Result<Bump, CliError> {
        let s = &self.sequence;
        if !(s.decay > 0.0 && s.decay < 1.0) {
            return Err(bad("sequence.decay", "must lie in (0, 1)"));
        }
        if !(s.regularity_b > 0.0 && s.regularity_b < 1.0) {
            return Err(bad("sequence.regularity_b", "must lie in (0, 1)"));
        }
        positive("sequence.regularity_r0", s.regularity_r0)?;
        Self::bump("sequence.bump", &s.bump, dim)
    }
}

/// ` (line L)` for a byte span, when known.
fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => format!(" (line {})", text[..r.start.min(text.len())].lines().count().max(1)),
        None => String::new(),
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = ScenarioConfig::parse(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(config, base_dir)
    }

    pub fn from_config(config: ScenarioConfig, base_dir: PathBuf) -> Result<Self, CliError> {
        let domain = match (&config.mesh.demo, &config.mesh.path) {
            (Some(_), Some(_)) => return Err(bad("mesh", "set either mesh.demo or mesh.path, not both")),
            (None, None) | (Some(_), None) => {
                let name = config.mesh.demo.as_deref().unwrap_or("disk-in-disk");
                if config.mesh.level > 3 {
                    return Err(bad("mesh.level", "demo meshes have levels 0 to 3"));
                }
                demo::by_name(name, config.mesh.level).map_err(|e| bad("mesh.demo", e))?
            }
            (None, Some(p)) => {
                let p = base_dir.join(p);
                let f = fs::File::open(&p).map_err(|e| CliError::io(&p, e))?;
                ReferenceDomain::read(BufReader::new(f))?
            }
        };
        let s = Self { config, base_dir, domain: Arc::new(domain) };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Every section is checked, so a bad value fails before any compute.
    fn validate(&self) -> Result<(), CliError> {
        let dim = self.dim();
        let c = &self.config;
        c.material(dim)?;
        c.electrostatics(dim)?;
        c.optimizer(c.seed)?;
        if let Some(b) = &c.start.bump {
            ScenarioConfig::bump("start.bump", b, dim)?;
        }
        let solver = c.solver_options()?;
        c.monotonicity(c.seed, solver)?;
        c.koch(solver)?;
        c.sequence_checked(dim)?;
        for (field, spec) in [("capacity.conductor", &c.capacity.conductor), ("capacity.domain", &c.capacity.domain)] {
            if let Some(spec) = spec {
                check_shape(field, spec)?;
            }
        }
        if c.capacity.domain.is_some() && c.capacity.conductor.is_none() {
            return Err(bad("capacity.domain", "needs capacity.conductor"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Starting deformation: `start.deformation`, else the identity displaced
    /// by `start.bump`, else the identity.
    pub fn start(&self) -> Result<Deformation, CliError> {
        let id = Deformation::identity(self.domain.clone());
        if let Some(p) = &self.config.start.deformation {
            return self.read_deformation(&self.resolve(p));
        }
        match &self.config.start.bump {
            Some(b) => Ok(ScenarioConfig::bump("start.bump", b, self.dim())?.apply(&id, 1.0)),
            None => Ok(id),
        }
    }

    pub fn read_deformation(&self, p: &Path) -> Result<Deformation, CliError> {
        let f = fs::File::open(p).map_err(|e| CliError::io(p, e))?;
        Ok(Deformation::read(self.domain.clone(), BufReader::new(f))?)
    }

    pub fn shape_mask(&self, spec: &ShapeSpec, grid: EulerianGrid, kind: MaskKind) -> Result<SetMask, CliError> {
        Ok(match spec {
            ShapeSpec::Ball { center, radius } => shapes::ball(grid, kind, center, *radius),
            ShapeSpec::Box { lo, hi } => {
                let (lo, hi) = (lo.clone(), hi.clone());
                SetMask::from_fn(grid, kind, move |p| (0..lo.len()).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
            }
            ShapeSpec::Polygon { vertices } => shapes::polygon(grid, kind, vertices),
            ShapeSpec::Mask { path } => {
                let p = self.resolve(path);
                let f = fs::File::open(&p).map_err(|e| CliError::io(&p, e))?;
                let m = gio::read_mask(&mut BufReader::new(f))?;
                if *m.grid() != grid {
                    return Err(bad("capacity", format!("mask {} does not live on the configured grid", p.display())));
                }
                m.with_kind(kind)
            }
        })
    }
}

fn check_shape(field: &str, spec: &ShapeSpec) -> Result<(), CliError> {
    match spec {
        ShapeSpec::Ball { center, radius } => {
            if center.is_empty() || center.len() > 3 {
                return Err(bad(&format!("{field}.center"), "needs 2 or 3 components"));
            }
            positive(&format!("{field}.radius"), *radius)
        }
        ShapeSpec::Box { lo, hi } => {
            if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(b >= a)) {
                return Err(bad(field, "box needs lo <= hi with matching lengths"));
            }
            Ok(())
        }
        ShapeSpec::Polygon { vertices } => {
            if vertices.len() < 3 {
                return Err(bad(&format!("{field}.vertices"), "a polygon needs at least three vertices"));
            }
            Ok(())
        }
        ShapeSpec::Mask { .. } => Ok(()),
    }
}
