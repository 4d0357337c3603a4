//! Matrix-free solver for the cell-centred discrete Dirichlet problem.
//!
//! Unknowns are the free cells. The operator is the unscaled `2d + 1` point
//! Laplacian `(A v)_i = 2d v_i - Σ_{free j ~ i} v_j`; fixed neighbours move to
//! the right-hand side. The system is solved by preconditioned conjugate
//! gradients. The default preconditioner is one symmetric V-cycle of an
//! aggregation multigrid (piecewise-constant transfer over 2^d blocks, Galerkin
//! coarse operators, red-black Gauss-Seidel smoothing ordered red-black before
//! the coarse correction and black-red after it); plain diagonal scaling is
//! available for cross-checking.
//!
//! All reductions use [`crate::parallel`], so iterates are identical for any
//! thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::geometry::EulerianGrid;
use crate::parallel;

const NONE: u32 = u32::MAX;

/// Preconditioner choice for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    /// Diagonal (Jacobi) scaling.
    Diagonal,
    /// Symmetric multigrid V-cycle.
    #[default]
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target relative residual `||b - A x|| / ||b||`.
    pub tolerance: f64,
    /// Iteration cap as a multiple of `sqrt(free cells)`.
    pub cap_factor: f64,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, cap_factor: 50.0, preconditioner: Preconditioner::Multigrid }
    }
}

/// Cell role in a Dirichlet problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellState {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sparse operator on one level: diagonal plus weighted face couplings.
#[derive(Debug, Clone)]
struct Level {
    n: usize,
    ndir: usize,
    diag: Vec<f64>,
    nbr: Vec<u32>,
    w: Vec<f64>,
    coords: Vec<[u32; 3]>,
    dims: [usize; 3],
    red: Vec<u32>,
    black: Vec<u32>,
}

impl Level {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let ndir = self.ndir;
        y.par_chunks_mut(parallel::CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * parallel::CHUNK;
            for (k, out) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let mut s = self.diag[i] * x[i];
                for d in 0..ndir {
                    let j = self.nbr[i * ndir + d];
                    if j != NONE {
                        s -= self.w[i * ndir + d] * x[j as usize];
                    }
                }
                *out = s;
            }
        });
    }

    fn relax_color(&self, color: &[u32], b: &[f64], x: &mut [f64]) {
        let ndir = self.ndir;
        let xs: &[f64] = x;
        let updates: Vec<f64> = color
            .par_iter()
            .map(|&i| {
                let i = i as usize;
                let mut s = b[i];
                for d in 0..ndir {
                    let j = self.nbr[i * ndir + d];
                    if j != NONE {
                        s += self.w[i * ndir + d] * xs[j as usize];
                    }
                }
                s / self.diag[i]
            })
            .collect();
        for (&i, u) in color.iter().zip(updates) {
            x[i as usize] = u;
        }
    }

    fn split_colors(&mut self) {
        self.red.clear();
        self.black.clear();
        for (i, c) in self.coords.iter().enumerate() {
            if (c[0] + c[1] + c[2]) % 2 == 0 {
                self.red.push(i as u32);
            } else {
                self.black.push(i as u32);
            }
        }
    }

    /// Galerkin coarsening over 2^d blocks. Returns the coarse level and the
    /// fine-to-coarse map.
    fn coarsen(&self, dim: usize) -> (Level, Vec<u32>) {
        let mut cdims = [1usize; 3];
        for a in 0..dim {
            cdims[a] = self.dims[a].div_ceil(2);
        }
        let cindex = |c: [u32; 3]| (c[0] as usize) + cdims[0] * ((c[1] as usize) + cdims[1] * (c[2] as usize));
        let mut dense = vec![NONE; cdims.iter().product()];
        let mut coords = Vec::new();
        let mut parent = Vec::with_capacity(self.n);
        for c in &self.coords {
            let mut p = [0u32; 3];
            for a in 0..dim {
                p[a] = c[a] / 2;
            }
            let k = cindex(p);
            if dense[k] == NONE {
                dense[k] = coords.len() as u32;
                coords.push(p);
            }
            parent.push(dense[k]);
        }
        let nc = coords.len();
        let ndir = self.ndir;
        let mut diag = vec![0.0; nc];
        let mut nbr = vec![NONE; nc * ndir];
        let mut w = vec![0.0; nc * ndir];
        for i in 0..self.n {
            let pi = parent[i] as usize;
            diag[pi] += self.diag[i];
            for d in 0..ndir {
                let j = self.nbr[i * ndir + d];
                if j == NONE {
                    continue;
                }
                let pj = parent[j as usize];
                if pj as usize == pi {
                    diag[pi] -= self.w[i * ndir + d];
                } else {
                    nbr[pi * ndir + d] = pj;
                    w[pi * ndir + d] += self.w[i * ndir + d];
                }
            }
        }
        let mut level = Level { n: nc, ndir, diag, nbr, w, coords, dims: cdims, red: vec![], black: vec![] };
        level.split_colors();
        (level, parent)
    }

    fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
            for d in 0..self.ndir {
                let j = self.nbr[i * self.ndir + d];
                if j != NONE {
                    m[(i, j as usize)] -= self.w[i * self.ndir + d];
                }
            }
        }
        m
    }
}

/// Multigrid hierarchy used as a preconditioner.
struct Hierarchy {
    levels: Vec<Level>,
    parents: Vec<Vec<u32>>,
    coarse: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

const COARSEST: usize = 400;

impl Hierarchy {
    fn build(fine: &Level, dim: usize) -> Hierarchy {
        let mut levels = vec![fine.clone()];
        let mut parents = Vec::new();
        loop {
            let last = levels.last().unwrap();
            if last.n <= COARSEST || last.dims[..dim].iter().all(|&n| n <= 2) {
                break;
            }
            let (next, parent) = last.coarsen(dim);
            if next.n >= last.n {
                break;
            }
            levels.push(next);
            parents.push(parent);
        }
        let last = levels.last().unwrap();
        let coarse = if last.n <= 4 * COARSEST { last.dense().cholesky() } else { None };
        Hierarchy { levels, parents, coarse }
    }

    fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            match &self.coarse {
                Some(chol) => {
                    let sol = chol.solve(&DVector::from_column_slice(b));
                    x.copy_from_slice(sol.as_slice());
                }
                None => {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    for _ in 0..20 {
                        level.relax_color(&level.red, b, x);
                        level.relax_color(&level.black, b, x);
                    }
                    for _ in 0..20 {
                        level.relax_color(&level.black, b, x);
                        level.relax_color(&level.red, b, x);
                    }
                }
            }
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        level.relax_color(&level.red, b, x);
        level.relax_color(&level.black, b, x);

        let mut r = vec![0.0; level.n];
        level.apply(x, &mut r);
        r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);

        let parent = &self.parents[l];
        let nc = self.levels[l + 1].n;
        let mut bc = vec![0.0; nc];
        for (i, &p) in parent.iter().enumerate() {
            bc[p as usize] += r[i];
        }
        let mut xc = vec![0.0; nc];
        self.vcycle(l + 1, &bc, &mut xc);
        x.par_iter_mut().zip(parent.par_iter()).for_each(|(xi, &p)| *xi += xc[p as usize]);

        level.relax_color(&level.black, b, x);
        level.relax_color(&level.red, b, x);
    }
}

/// Solves the Dirichlet problem on `grid` with the given cell states. Cells
/// outside the grid act as fixed zeros. Returns the full per-cell field.
pub fn solve(
    grid: &EulerianGrid,
    states: &[CellState],
    initial: Option<&[f64]>,
    opts: &SolverOptions,
) -> (Vec<f64>, SolveStats) {
    let dim = grid.dim();
    let ndir = 2 * dim;
    let mut index = vec![NONE; states.len()];
    let mut cells = Vec::new();
    for (i, s) in states.iter().enumerate() {
        if *s == CellState::Free {
            index[i] = cells.len() as u32;
            cells.push(i);
        }
    }
    let n = cells.len();
    let mut field: Vec<f64> = states
        .iter()
        .map(|s| match s {
            CellState::Fixed(v) => *v,
            CellState::Free => 0.0,
        })
        .collect();
    if n == 0 {
        return (field, SolveStats { residual: 0.0, iterations: 0, converged: true });
    }

    let mut nbr = vec![NONE; n * ndir];
    let mut w = vec![0.0; n * ndir];
    let mut b = vec![0.0; n];
    let mut coords = Vec::with_capacity(n);
    for (k, &i) in cells.iter().enumerate() {
        let c = grid.coords(i);
        coords.push([c[0] as u32, c[1] as u32, c[2] as u32]);
        for d in 0..ndir {
            if let Some(j) = grid.neighbor(i, d) {
                match states[j] {
                    CellState::Free => {
                        nbr[k * ndir + d] = index[j];
                        w[k * ndir + d] = 1.0;
                    }
                    CellState::Fixed(v) => b[k] += v,
                }
            }
        }
    }
    let mut dims = [1usize; 3];
    dims[..dim].copy_from_slice(grid.dims());
    let mut fine = Level { n, ndir, diag: vec![ndir as f64; n], nbr, w, coords, dims, red: vec![], black: vec![] };
    fine.split_colors();

    let mut x: Vec<f64> = match initial {
        Some(init) => cells.iter().map(|&i| init[i]).collect(),
        None => vec![0.0; n],
    };
    let hierarchy = match opts.preconditioner {
        Preconditioner::Multigrid => Some(Hierarchy::build(&fine, dim)),
        Preconditioner::Diagonal => None,
    };
    let precondition = |r: &[f64], z: &mut [f64]| match &hierarchy {
        Some(h) => h.vcycle(0, r, z),
        None => {
            let inv = 1.0 / ndir as f64;
            z.par_iter_mut().zip(r.par_iter()).for_each(|(zi, ri)| *zi = ri * inv);
        }
    };

    let b_norm = parallel::dot(&b, &b).sqrt();
    let max_iter = ((opts.cap_factor * (n as f64).sqrt()).ceil() as usize).max(10);
    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut z = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64], q: &mut [f64]| {
        fine.apply(x, q);
        r.par_iter_mut().zip(b.par_iter()).zip(q.par_iter()).for_each(|((ri, bi), qi)| *ri = bi - qi);
    };
    residual(&x, &mut r, &mut q);
    let mut rel = parallel::dot(&r, &r).sqrt() / b_norm;
    let mut iterations = 0;
    while rel > opts.tolerance && iterations < max_iter {
        // (Re)start: fresh search direction from the current true residual.
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = parallel::dot(&r, &z);
        while iterations < max_iter {
            fine.apply(&p, &mut q);
            let pq = parallel::dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += alpha * pi);
            r.par_iter_mut().zip(q.par_iter()).for_each(|(ri, qi)| *ri -= alpha * qi);
            iterations += 1;
            rel = parallel::dot(&r, &r).sqrt() / b_norm;
            if rel <= opts.tolerance {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = parallel::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
        // Guard against drift of the recursively updated residual.
        residual(&x, &mut r, &mut q);
        rel = parallel::dot(&r, &r).sqrt() / b_norm;
    }
    for (k, &i) in cells.iter().enumerate() {
        field[i] = x[k];
    }
    (field, SolveStats { residual: rel, iterations, converged: rel <= opts.tolerance })
}
