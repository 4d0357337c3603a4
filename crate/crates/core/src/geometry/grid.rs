use crate::{Error, Result};

/// Uniform isotropic Cartesian grid in two or three dimensions.
///
/// Cells are addressed by a linear index in which the x index varies fastest
/// (row-major order of a `[z][y][x]` array). For `dim == 2` the third axis has
/// a single cell and is ignored everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianGrid {
    dim: usize,
    origin: [f64; 3],
    spacing: f64,
    dims: [usize; 3],
}

impl EulerianGrid {
    pub fn new(dim: usize, origin: &[f64], spacing: f64, dims: &[usize]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if origin.len() != dim || dims.len() != dim {
            return Err(Error::InvalidGrid("origin and dims must have one entry per axis".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid("every axis needs at least two cells".into()));
        }
        if origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let mut o = [0.0; 3];
        let mut n = [1usize; 3];
        o[..dim].copy_from_slice(origin);
        n[..dim].copy_from_slice(dims);
        Ok(Self { dim, origin: o, spacing, dims: n })
    }

    /// Grid covering the axis-aligned box `[lo, hi]` with spacing close to `h`;
    /// the box is enlarged so that it is an integer number of cells wide.
    pub fn covering(dim: usize, lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let dims: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (((b - a) / h) - 1e-9).ceil().max(2.0) as usize)
            .collect();
        let origin: Vec<f64> = lo
            .iter()
            .zip(hi)
            .zip(&dims)
            .map(|((a, b), &n)| 0.5 * (a + b) - 0.5 * n as f64 * h)
            .collect();
        Self::new(dim, &origin, h, &dims)
    }

    /// Grid with `cells` cells per axis centred at the origin, covering the
    /// cube of half-width `half_width`.
    pub fn centered_cube(dim: usize, half_width: f64, cells: usize) -> Result<Self> {
        let h = 2.0 * half_width / cells as f64;
        Self::new(dim, &vec![-half_width; dim], h, &vec![cells; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.dim]
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Volume (area in 2D) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn upper_corner(&self) -> [f64; 3] {
        let mut hi = self.origin;
        for (a, hi) in hi.iter_mut().enumerate().take(self.dim) {
            *hi += self.dims[a] as f64 * self.spacing;
        }
        hi
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Cell-centre coordinates; the unused third component is zero in 2D.
    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 3] {
        self.center_of(self.coords(idx))
    }

    #[inline]
    pub fn center_of(&self, c: [usize; 3]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.spacing;
        }
        p
    }

    /// Neighbour across the face in direction `dir` (0..2·dim; even = minus,
    /// odd = plus along axis `dir / 2`), or `None` off the grid.
    #[inline]
    pub fn neighbor(&self, idx: usize, dir: usize) -> Option<usize> {
        let axis = dir / 2;
        let c = self.coords(idx);
        let stride = match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        };
        if dir % 2 == 0 {
            (c[axis] > 0).then(|| idx - stride)
        } else {
            (c[axis] + 1 < self.dims[axis]).then(|| idx + stride)
        }
    }

    /// True if the cell lies on the outermost layer of the grid.
    pub fn on_outer_layer(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).any(|a| c[a] == 0 || c[a] + 1 == self.dims[a])
    }

    /// Index range `[lo, hi)` of cells along `axis` whose centres lie in
    /// `[a, b]`.
    pub fn cell_range(&self, axis: usize, a: f64, b: f64) -> (usize, usize) {
        let h = self.spacing;
        let lo = ((a - self.origin[axis]) / h - 0.5).ceil().max(0.0);
        let hi = ((b - self.origin[axis]) / h - 0.5).floor() + 1.0;
        let n = self.dims[axis] as f64;
        (lo.min(n) as usize, hi.clamp(0.0, n) as usize)
    }

    /// True if the closed box `[lo, hi]` lies in the interior of the grid box.
    pub fn strictly_contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        let top = self.upper_corner();
        (0..self.dim).all(|a| lo[a] > self.origin[a] && hi[a] < top[a])
    }
}

/// Whether a mask stands for a compact or an open set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Compact,
    Open,
}

impl MaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskKind::Compact => "compact",
            MaskKind::Open => "open",
        }
    }
}

/// A set rasterized on a grid: a cell belongs to the set iff its centre does.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMask {
    grid: EulerianGrid,
    cells: Vec<bool>,
    kind: MaskKind,
}

impl SetMask {
    pub fn empty(grid: EulerianGrid, kind: MaskKind) -> Self {
        Self { grid, cells: vec![false; grid.n_cells()], kind }
    }

    pub fn full(grid: EulerianGrid, kind: MaskKind) -> Self {
        Self { grid, cells: vec![true; grid.n_cells()], kind }
    }

    pub fn from_cells(grid: EulerianGrid, kind: MaskKind, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != grid.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} cells, grid has {}",
                cells.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, cells, kind })
    }

    /// Samples `inside` at every cell centre.
    pub fn from_fn<F>(grid: EulerianGrid, kind: MaskKind, inside: F) -> Self
    where
        F: Fn(&[f64; 3]) -> bool + Sync,
    {
        use rayon::prelude::*;
        let cells = (0..grid.n_cells())
            .into_par_iter()
            .map(|i| inside(&grid.center(i)))
            .collect();
        Self { grid, cells, kind }
    }

    pub fn grid(&self) -> &EulerianGrid {
        &self.grid
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: MaskKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.cells[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    /// Occupied volume: number of cells times the cell volume.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, &c)| c.then_some(i))
    }

    pub fn touches_outer_layer(&self) -> bool {
        self.iter_occupied().any(|i| self.grid.on_outer_layer(i))
    }

    fn check_same_grid(&self, other: &SetMask) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_subset_of(&self, other: &SetMask) -> Result<bool> {
        self.check_same_grid(other)?;
        Ok(self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b))
    }

    pub fn union(&self, other: &SetMask) -> Result<SetMask> {
        self.check_same_grid(other)?;
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| a || b).collect();
        Ok(SetMask { grid: self.grid, cells, kind: self.kind })
    }

    pub fn intersection(&self, other: &SetMask) -> Result<SetMask> {
        self.check_same_grid(other)?;
        let cells = self.cells.iter().zip(&other.cells).map(|(&a, &b)| a && b).collect();
        Ok(SetMask { grid: self.grid, cells, kind: self.kind })
    }

    /// Set complement within the grid box. Compact and open kinds swap.
    pub fn complement(&self) -> SetMask {
        let kind = match self.kind {
            MaskKind::Compact => MaskKind::Open,
            MaskKind::Open => MaskKind::Compact,
        };
        SetMask { grid: self.grid, cells: self.cells.iter().map(|c| !c).collect(), kind }
    }

    /// Number of cells in which the two masks differ.
    pub fn symmetric_difference_count(&self, other: &SetMask) -> Result<usize> {
        self.check_same_grid(other)?;
        Ok(self.cells.iter().zip(&other.cells).filter(|(a, b)| a != b).count())
    }

    /// Cells of the set that have a face neighbour outside it. Off-grid
    /// neighbours count as outside.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let g = &self.grid;
        self.iter_occupied()
            .filter(|&i| (0..2 * g.dim()).any(|dir| g.neighbor(i, dir).map_or(true, |j| !self.cells[j])))
            .collect()
    }

    /// Resamples the mask onto another grid: a target cell is occupied iff its
    /// centre falls into an occupied source cell.
    pub fn resample(&self, target: &EulerianGrid) -> Result<SetMask> {
        if target.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let src = self.grid;
        let cells = &self.cells;
        Ok(SetMask::from_fn(*target, self.kind, |p| {
            let mut c = [0usize; 3];
            for a in 0..src.dim() {
                let t = ((p[a] - src.origin[a]) / src.spacing).floor();
                if t < 0.0 || t >= src.dims[a] as f64 {
                    return false;
                }
                c[a] = t as usize;
            }
            cells[src.index(c)]
        }))
    }
}

/// Per-cell nonnegative distances in length units.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    grid: EulerianGrid,
    values: Vec<f64>,
}

impl DistanceField {
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

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Value at the cell containing point `p`.
    pub fn at_point(&self, p: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let mut c = [0usize; 3];
        for a in 0..g.dim() {
            let t = ((p[a] - g.origin[a]) / g.spacing).floor();
            if t < 0.0 || t >= g.dims[a] as f64 {
                return None;
            }
            c[a] = t as usize;
        }
        Some(self.values[g.index(c)])
    }
}
