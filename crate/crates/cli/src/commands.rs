//! Subcommand bodies. Every command computes first and writes files only
//! once the computation has succeeded.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use electroelastic::capacity::{relative_capacity, self_capacity_scheduled, CapacityProblem, CapacityResult};
use electroelastic::deformation::Deformation;
use electroelastic::energy::{deformed_capacity, total_energy};
use electroelastic::geometry::{io as gio, MaskKind};
use electroelastic::optimize::minimize;
use electroelastic::verify::{
    check_koch, check_monotonicity_suite, check_regularity_closure, check_semicontinuity, reports_to_csv,
    reports_to_text, MonotoneProperty, PropertyReport, SemicontinuityOutcome,
};

use crate::config::Scenario;
use crate::error::CliError;

/// Files produced by a command, relative to the output directory.
pub struct Output {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn write(self) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let p = self.dir.join(name);
            fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
            written.push(p);
        }
        Ok(written)
    }
}

fn field_bytes(cap: &CapacityResult) -> Result<Vec<u8>, CliError> {
    let mut buf = BufWriter::new(Vec::new());
    gio::write_field(&mut buf, cap.potential.grid(), "potential", cap.potential.values())?;
    Ok(buf.into_inner().map_err(|e| CliError::Config(e.to_string()))?)
}

fn deformation_bytes(def: &Deformation) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    def.write(&mut buf)?;
    Ok(buf)
}

/// Writes `capacity.txt` (result record) and `potential.field`.
pub fn capacity(scn: &Scenario, out: &mut Output) -> Result<String, CliError> {
    let c = &scn.config;
    let solver = c.solver_options()?;
    let result = match &c.capacity.conductor {
        Some(spec) => {
            let dim = if c.grid.lo.is_empty() { scn.dim() } else { c.grid.lo.len() };
            let grid = c.grid(dim)?;
            let e = scn.shape_mask(spec, grid, MaskKind::Compact)?;
            match &c.capacity.domain {
                Some(dspec) => {
                    let d = scn.shape_mask(dspec, grid, MaskKind::Open)?;
                    relative_capacity(&CapacityProblem::new(e, d)?, &solver)?
                }
                None => self_capacity_scheduled(&e, &c.schedule()?, &solver)?,
            }
        }
        None => deformed_capacity(&scn.start()?, &c.electrostatics(scn.dim())?)?,
    };
    let record = result.to_record();
    out.add("capacity.txt", record.clone());
    out.add("potential.field", field_bytes(&result)?);
    Ok(record)
}

/// Writes `energy.txt`. An infinite total is reported after the record is
/// written.
pub fn energy(scn: &Scenario, deformation: Option<&Path>, out: &mut Output) -> Result<String, CliError> {
    let def = match deformation {
        Some(p) => scn.read_deformation(p)?,
        None => scn.start()?,
    };
    let dim = scn.dim();
    let b = total_energy(&def, &scn.config.material(dim)?, &scn.config.electrostatics(dim)?)?;
    let record = b.to_record();
    out.add("energy.txt", record.clone());
    if !b.total.is_finite() {
        let reason = b.reason.map_or("unknown", |r| r.as_str());
        return Err(CliError::InfiniteEnergy(reason.to_string()));
    }
    Ok(record)
}

/// Writes `trajectory.csv`, `summary.txt`, `final_energy.txt` and
/// `final_deformation.txt`.
pub fn minimize_cmd(scn: &Scenario, seed: u64, out: &mut Output) -> Result<String, CliError> {
    let dim = scn.dim();
    let c = &scn.config;
    let t = minimize(&scn.start()?, &c.material(dim)?, &c.electrostatics(dim)?, &c.optimizer(seed)?)?;
    let summary = t.summary();
    out.add("trajectory.csv", t.to_csv());
    out.add("summary.txt", summary.clone());
    out.add("final_energy.txt", t.last().to_record());
    out.add("final_deformation.txt", deformation_bytes(&t.final_deformation)?);
    Ok(summary)
}

/// Property selectors accepted by `verify`.
pub const SELECTORS: &[&str] = &[
    "all",
    "monotone.*",
    "monotone.compact",
    "monotone.domain",
    "monotone.thickening",
    "monotone.erosion",
    "monotone.thinning",
    "koch",
    "semicontinuity",
    "regularity",
];

fn semicontinuity(scn: &Scenario) -> Result<SemicontinuityOutcome, CliError> {
    let c = &scn.config;
    let bump = c.sequence_checked(scn.dim())?;
    let setup = c.electrostatics(scn.dim())?;
    Ok(check_semicontinuity(&scn.start()?, &bump, c.sequence.decay, c.sequence.n_max, &setup)?)
}

fn regularity(scn: &Scenario) -> Result<PropertyReport, CliError> {
    let c = &scn.config;
    let s = &c.sequence;
    let bump = c.sequence_checked(scn.dim())?;
    let limit = scn.start()?;
    let members: Vec<Deformation> = (0..=s.n_max).map(|n| bump.apply(&limit, s.decay.powi(n as i32))).collect();
    let grid = c.grid(scn.dim())?;
    Ok(check_regularity_closure(&members, &limit, &grid, s.regularity_b, s.regularity_r0)?)
}

/// Writes `verify_report.txt` and `verify_trials.csv`.
pub fn verify(scn: &Scenario, selector: &str, seed: u64, out: &mut Output) -> Result<String, CliError> {
    let c = &scn.config;
    let solver = c.solver_options()?;
    let all = selector == "all";
    let mut reports = Vec::new();
    let props: Vec<MonotoneProperty> = match selector {
        "all" | "monotone.*" => MonotoneProperty::ALL.to_vec(),
        s => MonotoneProperty::parse(s).into_iter().collect(),
    };
    if !props.is_empty() {
        reports.extend(check_monotonicity_suite(&c.monotonicity(seed, solver)?, &props)?);
    }
    if all || selector == "koch" {
        reports.push(check_koch(&c.koch(solver)?)?);
    }
    if all || selector == "semicontinuity" {
        reports.push(semicontinuity(scn)?.report);
    }
    if all || selector == "regularity" {
        reports.push(regularity(scn)?);
    }
    if reports.is_empty() {
        return Err(CliError::Config(format!("unknown property selector `{selector}`")));
    }
    let text = reports_to_text(&reports);
    out.add("verify_report.txt", text);
    out.add("verify_trials.csv", reports_to_csv(&reports));
    let mut s = String::new();
    for r in &reports {
        let _ = writeln!(s, "{} {} ({} trials, {} violations)", r.property, if r.passed() { "pass" } else { "FAIL" }, r.trials, r.violations);
    }
    Ok(s)
}

/// Writes `sequence.csv` and `sequence_report.txt`.
pub fn sequence(scn: &Scenario, out: &mut Output) -> Result<String, CliError> {
    let o = semicontinuity(scn)?;
    let reg = regularity(scn)?;
    let mut csv = String::from("index,delta,capacity,gap\n");
    for r in &o.records {
        let _ = writeln!(csv, "{},{},{},{}", r.index, r.delta, r.capacity, r.gap);
    }
    let text = reports_to_text(&[o.report.clone(), reg.clone()]);
    out.add("sequence.csv", csv);
    out.add("sequence_report.txt", text.clone());
    Ok(text)
}

