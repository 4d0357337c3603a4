//! Numerical checks of capacity monotonicity, semicontinuity along deformation
//! sequences, Koch prefractals and regular-domain closure.
//!
//! Every check produces a [`PropertyReport`]. Violations count only excesses
//! beyond the tolerance stored in the report.

use std::fmt::Write as _;

mod continuity;
mod koch;
mod monotonicity;

pub use continuity::{
    calibrate_tolerance, check_regularity_closure, check_regularity_closure_masks, check_semicontinuity,
    conductor_boundary_measure, SemicontinuityOutcome, SequenceRecord, ToleranceCalibration,
};
pub use koch::{check_koch, koch_max_level, koch_prefractal_masks, koch_snowflake, KochSetup};
pub use monotonicity::{check_monotonicity_suite, MonotonicitySetup, MonotoneProperty};

/// One trial of a property check.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// Quantities compared by the trial, in check order (usually capacities).
    pub values: Vec<f64>,
    /// Largest signed excess over the asserted inequality (`<= 0` means the
    /// inequality holds outright).
    pub excess: f64,
    /// Comparisons in this trial that exceeded the tolerance.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub property: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest excess over the asserted inequality, over all trials.
    pub max_violation: f64,
    pub tolerance: f64,
    pub records: Vec<TrialRecord>,
    /// Free-form `key = value` facts, such as limit gaps.
    pub notes: Vec<(String, String)>,
}

impl PropertyReport {
    pub fn new(property: &str, tolerance: f64) -> Self {
        Self {
            property: property.to_string(),
            trials: 0,
            violations: 0,
            max_violation: f64::NEG_INFINITY,
            tolerance,
            records: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, record: TrialRecord) {
        self.trials += 1;
        self.violations += record.violations;
        self.max_violation = self.max_violation.max(record.excess);
        self.records.push(record);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn note_value(&self, key: &str) -> Option<&str> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Structured text block, `[property]` followed by `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[{}]", self.property);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "violations = {}", self.violations);
        let _ = writeln!(s, "max_violation = {}", self.max_violation);
        let _ = writeln!(s, "tolerance = {}", self.tolerance);
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// CSV rows `property,trial,violations,excess,values` with the values
    /// joined by `;`.
    pub fn to_csv_rows(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let vals: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{},{},{},{},{}", self.property, r.trial, r.violations, r.excess, vals.join(";"));
        }
        s
    }
}

pub const CSV_HEADER: &str = "property,trial,violations,excess,values\n";

/// Text blocks of several reports, separated by blank lines.
pub fn reports_to_text(reports: &[PropertyReport]) -> String {
    reports.iter().map(|r| r.to_text()).collect::<Vec<_>>().join("\n")
}

/// CSV of the trials of several reports.
pub fn reports_to_csv(reports: &[PropertyReport]) -> String {
    let mut s = CSV_HEADER.to_string();
    for r in reports {
        s.push_str(&r.to_csv_rows());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_counts_and_serializes() {
        let mut r = PropertyReport::new("demo", 1e-9);
        r.push(TrialRecord { trial: 0, values: vec![1.0, 2.0], excess: -1.0, violations: 0 });
        r.push(TrialRecord { trial: 1, values: vec![3.0], excess: 0.5, violations: 2 });
        r.note("gap", 0.0);
        assert_eq!(r.trials, 2);
        assert_eq!(r.violations, 2);
        assert_eq!(r.max_violation, 0.5);
        assert!(!r.passed());
        assert_eq!(r.note_value("gap"), Some("0"));
        let text = r.to_text();
        assert!(text.starts_with("[demo]\ntrials = 2\nviolations = 2\n"));
        let csv = reports_to_csv(&[r]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("demo,0,0,-1,1;2"));
    }
}
