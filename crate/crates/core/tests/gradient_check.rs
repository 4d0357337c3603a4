//! Analytic elastic gradient against central finite differences on random
//! admissible deformations of every demo mesh.

use std::sync::Arc;

use electroelastic::deformation::{demo, Bump, Deformation, ReferenceDomain};
use electroelastic::energy::{elastic_energy, elastic_gradient, MaterialModel, MaterialParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REL_TOL: f64 = 1e-5;
const SAMPLES: usize = 20;

fn model(dim: usize) -> MaterialModel {
    let mut conductor = MaterialParams::new(1.0, 1.0, 1.0);
    conductor.load = [0.2, -0.4, 0.1];
    MaterialModel { conductor, insulator: MaterialParams::new(0.5, 0.5, 0.5), q: dim as f64 + 1.0, s: dim as f64 }
}

/// Sum of three random bumps, rejected until every element keeps positive
/// determinant.
fn random_deformation(mesh: &Arc<ReferenceDomain>, rng: &mut ChaCha8Rng, m: &MaterialModel) -> Deformation {
    let dim = mesh.dim();
    loop {
        let mut def = Deformation::identity(mesh.clone());
        for _ in 0..3 {
            let mut center = [0.0; 3];
            let mut direction = [0.0; 3];
            for a in 0..dim {
                center[a] = rng.gen_range(-0.6..0.6);
                direction[a] = rng.gen_range(-1.0..1.0);
            }
            let bump = Bump { center, radius: rng.gen_range(0.3..0.8), amplitude: rng.gen_range(0.01..0.06), direction };
            def = bump.apply(&def, 1.0);
        }
        if elastic_energy(&def, m).is_finite() {
            return def;
        }
    }
}

fn directional_fd(def: &Deformation, dir: &[[f64; 3]], m: &MaterialModel, eps: f64) -> f64 {
    let shifted = |t: f64| {
        let pos = def.positions().iter().zip(dir).map(|(p, d)| [p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]]).collect();
        Deformation::new(def.domain().clone(), pos).unwrap()
    };
    let e = |t: f64| elastic_energy(&shifted(t), m).value().unwrap();
    let coarse = (e(eps) - e(-eps)) / (2.0 * eps);
    let fine = (e(eps / 2.0) - e(-eps / 2.0)) / eps;
    // Richardson extrapolation cancels the second-order term.
    (4.0 * fine - coarse) / 3.0
}

fn check_mesh(name: &str, seed: u64) {
    let mesh = Arc::new(demo::by_name(name, 0).unwrap());
    let dim = mesh.dim();
    let m = model(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let def = random_deformation(&mesh, &mut rng, &m);
        let g = elastic_gradient(&def, &m).unwrap();
        for (v, gv) in g.iter().enumerate() {
            if mesh.is_clamped(v) {
                assert_eq!(*gv, [0.0; 3], "{name}: clamped vertex {v} has nonzero gradient");
            }
        }
        // Random free directions plus single-vertex directions.
        let mut dirs: Vec<Vec<[f64; 3]>> = Vec::new();
        for _ in 0..2 {
            dirs.push(
                (0..mesh.n_vertices())
                    .map(|v| {
                        let mut d = [0.0; 3];
                        if !mesh.is_clamped(v) {
                            for c in d.iter_mut().take(dim) {
                                *c = rng.gen_range(-1.0..1.0);
                            }
                        }
                        d
                    })
                    .collect(),
            );
        }
        // Single components where the gradient is not rounding noise.
        let gmax = g.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let active: Vec<(usize, usize)> = (0..mesh.n_vertices())
            .flat_map(|v| (0..dim).map(move |a| (v, a)))
            .filter(|&(v, a)| g[v][a].abs() > 1e-3 * gmax)
            .collect();
        for _ in 0..3 {
            let (v, a) = active[rng.gen_range(0..active.len())];
            let mut d = vec![[0.0; 3]; mesh.n_vertices()];
            d[v][a] = 1.0;
            dirs.push(d);
        }
        for d in &dirs {
            let analytic: f64 = g.iter().zip(d).map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).sum();
            let fd = directional_fd(&def, d, &m, 2e-5);
            let rel = (fd - analytic).abs() / analytic.abs().max(1e-8);
            worst = worst.max(rel);
            assert!(rel <= REL_TOL, "{name}: analytic {analytic} vs fd {fd} (rel {rel:e})");
        }
    }
    eprintln!("{name}: worst relative gradient error {worst:e}");
}

#[test]
fn disk_in_disk() {
    check_mesh("disk-in-disk", 11);
}

#[test]
fn disk_in_square() {
    check_mesh("disk-in-square", 12);
}

#[test]
fn ball_in_cube() {
    check_mesh("ball-in-cube", 13);
}
