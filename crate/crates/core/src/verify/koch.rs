//! Filled Koch snowflake prefractals and their capacities.

use super::{PropertyReport, TrialRecord};
use crate::capacity::{relative_capacity_from, CapacityProblem, CapacityResult, SolverOptions};
use crate::geometry::{regularity_density, shapes, EulerianGrid, MaskKind, SetMask};
use crate::{Error, Result};

/// Vertices (counter-clockwise) of the level-`level` snowflake built on an
/// equilateral triangle of side `side` centred at the origin.
pub fn koch_snowflake(level: usize, side: f64) -> Vec<[f64; 2]> {
    let rc = side / 3f64.sqrt();
    let mut pts: Vec<[f64; 2]> = [90.0f64, 210.0, 330.0]
        .iter()
        .map(|deg| {
            let t = deg.to_radians();
            [rc * t.cos(), rc * t.sin()]
        })
        .collect();
    let (s60, c60) = (60f64.to_radians().sin(), 0.5);
    for _ in 0..level {
        let n = pts.len();
        let mut next = Vec::with_capacity(4 * n);
        for k in 0..n {
            let a = pts[k];
            let b = pts[(k + 1) % n];
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            // Rotate clockwise: outward for a counter-clockwise boundary.
            let peak = [p1[0] + c60 * d[0] + s60 * d[1], p1[1] - s60 * d[0] + c60 * d[1]];
            next.extend_from_slice(&[a, p1, peak, p3]);
        }
        pts = next;
    }
    pts
}

/// Area of the level-`level` snowflake from the classical series.
pub fn koch_area(level: usize, side: f64) -> f64 {
    let a0 = 3f64.sqrt() / 4.0 * side * side;
    let sum: f64 = (1..=level).map(|k| (4.0f64 / 9.0).powi(k as i32 - 1)).sum();
    a0 * (1.0 + sum / 3.0)
}

/// Deepest level whose edges `side / 3^level` span at least two cells.
pub fn koch_max_level(side: f64, h: f64) -> Option<usize> {
    if side < 2.0 * h {
        return None;
    }
    let mut j = 0;
    while side / 3f64.powi(j as i32 + 1) >= 2.0 * h {
        j += 1;
    }
    Some(j)
}

/// Compact masks of the filled prefractals of levels `0..=max_level`.
pub fn koch_prefractal_masks(max_level: usize, side: f64, grid: &EulerianGrid) -> Result<Vec<SetMask>> {
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension("Koch prefractals are planar".into()));
    }
    let admissible = koch_max_level(side, grid.spacing());
    if admissible.map_or(true, |m| max_level > m) {
        return Err(Error::FeatureBelowResolution { level: max_level, max_level: admissible });
    }
    let rc = side / 3f64.sqrt();
    if !grid.strictly_contains_box(&[-rc, -rc], &[rc, rc]) {
        return Err(Error::OutOfBounds);
    }
    Ok((0..=max_level).map(|j| shapes::polygon(*grid, MaskKind::Compact, &koch_snowflake(j, side))).collect())
}

#[derive(Debug, Clone)]
pub struct KochSetup {
    pub side: f64,
    pub max_level: usize,
    pub grid: EulerianGrid,
    /// Radius of the enclosing disk used for relative capacities.
    pub enclosing_radius: f64,
    /// Relative tolerance of the area series.
    pub area_tolerance: f64,
    /// Probe radius, in cells, of the regularity diagnostic.
    pub regularity_cells: usize,
    pub solver: SolverOptions,
}

impl Default for KochSetup {
    fn default() -> Self {
        Self {
            side: 1.0,
            max_level: 5,
            grid: EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], 1.0 / 512.0).unwrap(),
            enclosing_radius: 0.9,
            area_tolerance: 0.01,
            regularity_cells: 8,
            solver: SolverOptions::default(),
        }
    }
}

/// Nesting, area series and capacities of the prefractals inside a fixed
/// disk. One record per level with values `[level, area, series_area,
/// capacity, regularity_density]` and the relative area error as excess.
///
/// Violations: a non-nested pair, an area error above tolerance, a capacity
/// that fails to increase strictly, or an increment ratio `>= 1` from level
/// 2 on. Notes list the increments and their ratios.
pub fn check_koch(setup: &KochSetup) -> Result<PropertyReport> {
    let masks = koch_prefractal_masks(setup.max_level, setup.side, &setup.grid)?;
    let domain = shapes::ball(setup.grid, MaskKind::Open, &[0.0, 0.0], setup.enclosing_radius);
    let r0 = setup.regularity_cells as f64 * setup.grid.spacing();
    let mut report = PropertyReport::new("koch", setup.area_tolerance);
    let mut caps: Vec<f64> = Vec::new();
    let mut prev: Option<CapacityResult> = None;
    let mut nested = true;
    let mut min_density = f64::INFINITY;
    for (j, mask) in masks.iter().enumerate() {
        let mut violations = 0;
        if j > 0 && !masks[j - 1].is_subset_of(mask)? {
            nested = false;
            violations += 1;
        }
        let area = mask.volume();
        let series = koch_area(j, setup.side);
        let rel = (area - series).abs() / series;
        if rel > setup.area_tolerance {
            violations += 1;
        }
        let prob = CapacityProblem::new(mask.clone(), domain.clone())?;
        let cap = relative_capacity_from(&prob, &setup.solver, prev.as_ref().map(|c| &c.potential))?;
        if let Some(&last) = caps.last() {
            if !(cap.value > last) {
                violations += 1;
            }
        }
        if j >= 2 {
            let ratio = (cap.value - caps[j - 1]) / (caps[j - 1] - caps[j - 2]);
            if !(ratio < 1.0) {
                violations += 1;
            }
        }
        let density = regularity_density(&mask.clone().with_kind(MaskKind::Open), r0)?.min_density;
        min_density = min_density.min(density);
        caps.push(cap.value);
        prev = Some(cap);
        report.push(TrialRecord {
            trial: j,
            values: vec![j as f64, area, series, caps[j], density],
            excess: rel,
            violations,
        });
    }
    let inc: Vec<f64> = caps.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = inc.windows(2).map(|w| w[1] / w[0]).collect();
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    report.note("nested", nested);
    report.note("capacities", join(&caps));
    report.note("increments", join(&inc));
    report.note("increment_ratios", join(&ratios));
    report.note("min_regularity_density", min_density);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes::polygon_area;

    #[test]
    fn polygon_areas_follow_the_series() {
        for j in 0..6 {
            let pts = koch_snowflake(j, 1.0);
            assert_eq!(pts.len(), 3 * 4usize.pow(j as u32));
            assert!((polygon_area(&pts) - koch_area(j, 1.0)).abs() < 1e-12);
        }
        assert!((koch_area(0, 2.0) - 3f64.sqrt()).abs() < 1e-12);
        // Limit area is 8/5 of the triangle.
        assert!((koch_area(60, 1.0) - 1.6 * koch_area(0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn edges_shrink_by_three() {
        let pts = koch_snowflake(2, 1.0);
        for k in 0..pts.len() {
            let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
            assert!(((b[0] - a[0]).hypot(b[1] - a[1]) - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resolution_limit() {
        assert_eq!(koch_max_level(1.0, 1.0 / 512.0), Some(5));
        assert_eq!(koch_max_level(1.0, 1.0 / 64.0), Some(3));
        assert_eq!(koch_max_level(0.01, 0.1), None);
        let g = EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], 1.0 / 64.0).unwrap();
        match koch_prefractal_masks(4, 1.0, &g) {
            Err(Error::FeatureBelowResolution { level: 4, max_level: Some(3) }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coarse_prefractals_are_nested_with_increasing_capacity() {
        let setup = KochSetup {
            max_level: 3,
            grid: EulerianGrid::covering(2, &[-1.0, -1.0], &[1.0, 1.0], 1.0 / 128.0).unwrap(),
            area_tolerance: 0.03,
            ..KochSetup::default()
        };
        let r = check_koch(&setup).unwrap();
        assert_eq!(r.trials, 4);
        assert_eq!(r.note_value("nested"), Some("true"));
        let caps: Vec<f64> = r.records.iter().map(|t| t.values[3]).collect();
        assert!(caps.windows(2).all(|w| w[1] > w[0]), "{caps:?}");
        assert!(r.records.iter().all(|t| t.values[4] > 0.1), "{}", r.to_text());
    }
}
