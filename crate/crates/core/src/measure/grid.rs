//! Uniform cell grids and sampled scalar fields.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::{Error, Result, Scalar};

/// Axis-aligned box split into `shape[k]` cells along axis `k`.
///
/// Cells are indexed row-major: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub shape: Vec<usize>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>, shape: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != shape.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len().min(shape.len()),
            });
        }
        for k in 0..lo.len() {
            if !(lo[k] < hi[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {k} needs finite lo < hi"
                )));
            }
            if shape[k] < 2 {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {k} needs at least 2 cells, got {}",
                    shape[k]
                )));
            }
        }
        Ok(Self { lo, hi, shape })
    }

    /// `[lo, hi]^d` with `n` cells per axis.
    pub fn cube(dim: usize, lo: T, hi: T, n: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_size(&self, axis: usize) -> T {
        (self.hi[axis] - self.lo[axis]) / T::from_count(self.shape[axis])
    }

    pub fn cell_sizes(&self) -> Vec<T> {
        (0..self.dim()).map(|k| self.cell_size(k)).collect()
    }

    pub fn cell_volume(&self) -> T {
        (0..self.dim())
            .map(|k| self.cell_size(k))
            .fold(T::one(), |a, b| a * b)
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> T {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]).powi(2))
            .sum::<T>()
            .sqrt()
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn center_of(&self, idx: &[usize]) -> Vec<T> {
        (0..self.dim())
            .map(|k| self.lo[k] + (T::from_count(idx[k]) + T::lit(0.5)) * self.cell_size(k))
            .collect()
    }

    pub fn center(&self, flat: usize) -> Vec<T> {
        self.center_of(&self.unravel(flat))
    }

    /// Multi-index of the cell containing `x`. The upper faces belong to the
    /// last cell of each axis.
    pub fn locate_index(&self, x: &[T]) -> Option<Vec<usize>> {
        if x.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            if !(x[k] >= self.lo[k] && x[k] <= self.hi[k]) {
                return None;
            }
            let i = ((x[k] - self.lo[k]) / self.cell_size(k))
                .floor()
                .to_usize()
                .unwrap_or(0);
            idx.push(i.min(self.shape[k] - 1));
        }
        Some(idx)
    }

    pub fn locate(&self, x: &[T]) -> Option<usize> {
        self.locate_index(x).map(|i| self.ravel(&i))
    }

    /// Centre of the cell containing `x`.
    pub fn snap(&self, x: &[T]) -> Option<Vec<T>> {
        self.locate_index(x).map(|i| self.center_of(&i))
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.locate_index(x).is_some()
    }

    /// Same box with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            shape: self.shape.iter().map(|&n| n * factor.max(1)).collect(),
        }
    }
}

/// Values sampled at cell centres, with a constant `fill` outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGridField<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
    pub fill: T,
}

impl<T: Scalar> ScalarGridField<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(Self {
            grid,
            values,
            fill: T::zero(),
        })
    }

    pub fn with_fill(mut self, fill: T) -> Self {
        self.fill = fill;
        self
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(&[T]) -> T + Sync) -> Result<Self> {
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.center(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
            fill: c,
        }
    }

    /// Value of the cell containing `x`, or `fill` outside the box.
    pub fn value_at(&self, x: &[T]) -> T {
        self.grid.locate(x).map_or(self.fill, |i| self.values[i])
    }

    /// `(sum |v|^p * cell volume)^(1/p)`; `p = inf` gives the max.
    pub fn lp_norm(&self, p: T) -> T {
        if p.is_infinite() {
            return self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        }
        let s: T = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(T::one() / p)
    }

    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Documented CSV: `#` header lines carrying bounds, resolution and fill,
    /// then one row per cell in row-major order with its centre and value.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::from("# bounds=");
        for k in 0..g.dim() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}:{}", g.lo[k].to_f64_lossy(), g.hi[k].to_f64_lossy());
        }
        out.push_str("\n# resolution=");
        let shape: Vec<String> = g.shape.iter().map(|n| n.to_string()).collect();
        out.push_str(&shape.join(","));
        let _ = writeln!(out, "\n# fill={}", self.fill.to_f64_lossy());
        for k in 1..=g.dim() {
            let _ = write!(out, "x_{k},");
        }
        out.push_str("value\n");
        for (i, v) in self.values.iter().enumerate() {
            for c in g.center(i) {
                let _ = write!(out, "{},", c.to_f64_lossy());
            }
            let _ = writeln!(out, "{}", v.to_f64_lossy());
        }
        out
    }
}
