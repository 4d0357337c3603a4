use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_electroelastic");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Value of `key = value` in a record file.
fn record_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

const ANNULUS: &str = r#"
grid.h = 0.0078125
capacity.conductor = { shape = "ball", center = [0.0, 0.0], radius = 0.25 }
capacity.domain = { shape = "ball", center = [0.0, 0.0], radius = 1.0 }
"#;

#[test]
fn capacity_of_annulus_config() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "a.toml", ANNULUS);
    let out = run(tmp.path(), &["--config", "a.toml", "--out", "res", "capacity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = fs::read_to_string(tmp.path().join("res/capacity.txt")).unwrap();
    let v: f64 = record_value(&rec, "value").parse().unwrap();
    let exact = 2.0 * PI / 4f64.ln();
    assert!((v - exact).abs() / exact < 0.02, "{v}");
    assert!(tmp.path().join("res/potential.field").exists());
}

#[test]
fn conductor_touching_domain_boundary_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "t.toml",
        r#"
grid.h = 0.03125
capacity.conductor = { shape = "ball", center = [0.5, 0.0], radius = 0.5 }
capacity.domain = { shape = "ball", center = [0.0, 0.0], radius = 1.0 }
"#,
    );
    let out = run(tmp.path(), &["--config", "t.toml", "--out", "res", "capacity"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("res").exists());
}

#[test]
fn capacity_record_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "a.toml", ANNULUS);
    for dir in ["r1", "r2"] {
        assert!(run(tmp.path(), &["--config", "a.toml", "--out", dir, "capacity"]).status.success());
    }
    let a = fs::read(tmp.path().join("r1/capacity.txt")).unwrap();
    let b = fs::read(tmp.path().join("r2/capacity.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn energy_of_identity() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "q0.toml", "mesh.demo = \"disk-in-disk\"\nelectrostatics.charge = 0.0\n");
    let out = run(tmp.path(), &["--config", "q0.toml", "--out", "q0", "energy"]);
    assert!(out.status.success());
    let rec = fs::read_to_string(tmp.path().join("q0/energy.txt")).unwrap();
    assert!(record_value(&rec, "elastic").parse::<f64>().unwrap().abs() < 1e-12);
    assert!(record_value(&rec, "total").parse::<f64>().unwrap().abs() < 1e-12);

    write_config(tmp.path(), "q1.toml", "mesh.demo = \"disk-in-disk\"\nelectrostatics.charge = 1.0\n");
    let out = run(tmp.path(), &["--config", "q1.toml", "--out", "q1", "energy"]);
    assert!(out.status.success());
    let rec = fs::read_to_string(tmp.path().join("q1/energy.txt")).unwrap();
    let total: f64 = record_value(&rec, "total").parse().unwrap();
    let exact = 4f64.ln() / (4.0 * PI);
    assert!((total - exact).abs() / exact < 0.02, "{total} vs {exact}");
}

#[test]
fn inverted_deformation_reports_infinite_energy() {
    let tmp = TempDir::new().unwrap();
    // With no charge, minimizing from the identity accepts no step, so the
    // final deformation file is the identity.
    write_config(tmp.path(), "z.toml", "mesh.demo = \"disk-in-disk\"\nelectrostatics.charge = 0.0\n");
    assert!(run(tmp.path(), &["--config", "z.toml", "--out", "m", "minimize"]).status.success());
    write_config(tmp.path(), "c.toml", "mesh.demo = \"disk-in-disk\"\nelectrostatics.charge = 1.0\n");
    let ident = fs::read_to_string(tmp.path().join("m/final_deformation.txt")).unwrap();
    let mut lines: Vec<String> = ident.lines().map(str::to_string).collect();
    assert_eq!(lines[1], "0 0 0");
    lines[1] = "0 0.3 0.0".to_string();
    fs::write(tmp.path().join("bad.txt"), lines.join("\n") + "\n").unwrap();
    let out = run(tmp.path(), &["--config", "c.toml", "--out", "bad", "energy", "--deformation", "bad.txt"]);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = fs::read_to_string(tmp.path().join("bad/energy.txt")).unwrap();
    assert_eq!(record_value(&rec, "total"), "+inf");
}

#[test]
fn exit_codes_by_error_class() {
    let tmp = TempDir::new().unwrap();
    let unknown = run(tmp.path(), &["verify", "--property", "no.such"]);
    assert_eq!(unknown.status.code(), Some(2));

    write_config(tmp.path(), "bad.toml", "material.q = 1.5\n");
    let bad = run(tmp.path(), &["--config", "bad.toml", "energy"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("material.q"));

    write_config(tmp.path(), "typo.toml", "grid.spacing = 0.1\n");
    assert_eq!(run(tmp.path(), &["--config", "typo.toml", "capacity"]).status.code(), Some(3));

    assert_eq!(run(tmp.path(), &["--config", "missing.toml", "capacity"]).status.code(), Some(6));
    assert_eq!(run(tmp.path(), &["--threads", "0", "capacity"]).status.code(), Some(3));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn minimize_writes_a_descending_trajectory() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "m.toml",
        r#"
mesh.demo = "disk-in-disk"
electrostatics.charge = 0.0
grid.h = 0.015625
start.bump = { center = [0.2, 0.1], radius = 0.6, amplitude = 0.05 }
optimizer.max_iterations = 5
"#,
    );
    let out = run(tmp.path(), &["--config", "m.toml", "--out", "m", "minimize"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("m/trajectory.csv")).unwrap();
    let totals: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse().unwrap()).collect();
    assert!(totals.len() >= 2);
    assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
    for f in ["summary.txt", "final_energy.txt", "final_deformation.txt"] {
        assert!(tmp.path().join("m").join(f).exists(), "{f}");
    }
}

#[test]
fn verify_single_property_writes_report_and_csv() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "v.toml", "monotonicity.trials = 3\nmonotonicity.h = 0.03125\n");
    let out = run(tmp.path(), &["--config", "v.toml", "--out", "v", "--seed", "5", "verify", "--property", "monotone.compact"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("v/verify_report.txt")).unwrap();
    assert!(report.starts_with("[monotone.compact]"), "{report}");
    assert_eq!(record_value(&report, "violations"), "0");
    let csv = fs::read_to_string(tmp.path().join("v/verify_trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
