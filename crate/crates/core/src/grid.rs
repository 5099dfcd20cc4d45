//! Rectangular cell grids and piecewise-constant density fields.
//!
//! Cells are indexed row-major with the last axis varying fastest. Point
//! evaluation of a density uses multilinear interpolation between cell
//! centres; inside the outermost half cell the stencil is clamped to the
//! boundary cells, and outside the box the density is zero.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

pub const MAX_DIM: usize = 3;

/// Interpolation stencil: at most `2^MAX_DIM` (cell, weight) pairs.
pub type Stencil = ArrayVec<(usize, f64), 8>;

/// Axis-aligned box split into `resolution[a]` equal cells along axis `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let n = lo.len();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidGrid(format!("dimension {n} not in 2..=3")));
        }
        if hi.len() != n || resolution.len() != n {
            return Err(Error::InvalidGrid(
                "lo, hi and resolution lengths differ".into(),
            ));
        }
        for a in 0..n {
            if !(lo[a].is_finite() && hi[a].is_finite() && hi[a] > lo[a]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: need finite lo < hi, got [{}, {}]",
                    lo[a], hi[a]
                )));
            }
            if resolution[a] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: resolution {} < 2",
                    resolution[a]
                )));
            }
        }
        Ok(Grid { lo, hi, resolution })
    }

    /// Cube `[lo, hi]^dim` with `res` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, res: usize) -> Result<Self> {
        Grid::new(vec![lo; dim], vec![hi; dim], vec![res; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.resolution[axis] as f64
    }

    pub fn cell_measure(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    /// Largest cell width over all axes.
    pub fn max_cell_width(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.cell_width(a))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0; MAX_DIM];
        let mut acc = 1;
        for a in (0..self.dim()).rev() {
            s[a] = acc;
            acc *= self.resolution[a];
        }
        s
    }

    pub fn cell_index(&self, multi: &[usize]) -> usize {
        let s = self.strides();
        multi.iter().enumerate().map(|(a, &i)| i * s[a]).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> ArrayVec<usize, MAX_DIM> {
        let mut out = ArrayVec::new();
        let s = self.strides();
        for &st in &s[..self.dim()] {
            out.push(idx / st);
            idx %= st;
        }
        out
    }

    pub fn cell_center(&self, idx: usize) -> ArrayVec<f64, MAX_DIM> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lo[a] + (i as f64 + 0.5) * self.cell_width(a))
            .collect()
    }

    /// Closed bounds `(lo, hi)` of one cell.
    pub fn cell_bounds(&self, idx: usize) -> (ArrayVec<f64, MAX_DIM>, ArrayVec<f64, MAX_DIM>) {
        let m = self.multi_index(idx);
        let lo = (0..self.dim())
            .map(|a| self.lo[a] + m[a] as f64 * self.cell_width(a))
            .collect();
        let hi = (0..self.dim())
            .map(|a| self.lo[a] + (m[a] + 1) as f64 * self.cell_width(a))
            .collect();
        (lo, hi)
    }

    /// Multilinear interpolation weights at `x`, or `None` outside the box.
    /// Zero weights are dropped; the remaining weights sum to one.
    pub fn stencil(&self, x: &[f64]) -> Option<Stencil> {
        if !self.contains(x) {
            return None;
        }
        let n = self.dim();
        let strides = self.strides();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for a in 0..n {
            let u = (x[a] - self.lo[a]) / self.cell_width(a) - 0.5;
            let last = self.resolution[a] - 1;
            let i = u.floor();
            if i < 0.0 {
                base[a] = 0;
                frac[a] = 0.0;
            } else if i as usize >= last {
                base[a] = last;
                frac[a] = 0.0;
            } else {
                base[a] = i as usize;
                frac[a] = u - i;
            }
        }
        let mut out = Stencil::new();
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..n {
                let up = (corner >> a) & 1 == 1;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + up as usize) * strides[a];
            }
            if w > 0.0 {
                out.push((idx, w));
            }
        }
        Some(out)
    }

    /// Same box with a different number of cells per axis.
    pub fn with_resolution(&self, resolution: Vec<usize>) -> Result<Self> {
        Grid::new(self.lo.clone(), self.hi.clone(), resolution)
    }

    /// Box dilated about the origin by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let lo: Vec<f64> = self.lo.iter().map(|v| v * factor).collect();
        let hi: Vec<f64> = self.hi.iter().map(|v| v * factor).collect();
        Grid::new(lo, hi, self.resolution.clone())
    }
}

/// Nonnegative density, constant on each grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::InvalidArgument(format!(
                "density has {} values for {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "density value {} at cell {i} is not finite and nonnegative",
                values[i]
            )));
        }
        Ok(DensityField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.cell_count();
        DensityField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let n = grid.cell_count();
        DensityField::new(grid, vec![value; n])
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn<F>(grid: Grid, exec: Execution, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let values = exec.map(grid.cell_count(), |i| f(&grid.cell_center(i)));
        DensityField::new(grid, values)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        DensityField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Interpolated value at `x`; zero outside the grid box.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        match self.grid.stencil(x) {
            Some(st) => st.iter().map(|&(i, w)| w * self.values[i]).sum(),
            None => 0.0,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `∫ ρ^p dm` as a cell sum.
    pub fn energy(&self, p: f64) -> f64 {
        self.energy_with(p, Execution::default())
    }

    pub fn energy_with(&self, p: f64, exec: Execution) -> f64 {
        let v = &self.values;
        let s = if p == 1.0 {
            exec.sum(v.len(), |i| v[i])
        } else if p == 2.0 {
            exec.sum(v.len(), |i| v[i] * v[i])
        } else {
            exec.sum(v.len(), |i| v[i].powf(p))
        };
        s * self.grid.cell_measure()
    }

    /// `c · ρ` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        DensityField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Same field on a dilated grid with values rescaled by `value_factor`.
    pub fn dilated(&self, factor: f64, value_factor: f64) -> Result<Self> {
        Ok(DensityField {
            grid: self.grid.scaled(factor)?,
            values: self.values.iter().map(|v| v * value_factor).collect(),
        })
    }
}
