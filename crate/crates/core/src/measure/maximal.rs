//! Discrete maximal and sharp maximal functions on grids.
//!
//! Balls are centred at cell centres. A cell's weight in the ball `B_s` is the
//! fraction of its box inside the ball, exact for cells entirely inside or
//! outside and estimated from `4^d` sub-cell centres otherwise. Cells beyond
//! the grid take the field's fill value. Averages divide by the total weight,
//! so constants are reproduced exactly up to rounding.
//!
//! The sup over radii runs over a geometric [`RadiusNet`] together with
//! `s = 0`, which contributes the cell value itself.

use rayon::prelude::*;

use crate::{Error, Result, Scalar};

use super::{Grid, ScalarGridField};

const SUBSAMPLES: usize = 4;

/// Decreasing radii `top * ratio^-k` down to `bottom`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusNet<T> {
    pub radii: Vec<T>,
}

impl<T: Scalar> RadiusNet<T> {
    pub fn default_ratio() -> T {
        T::lit(2f64.powf(0.25))
    }

    pub fn geometric(top: T, bottom: T, ratio: T) -> Result<Self> {
        if !(top > T::zero() && bottom > T::zero() && ratio > T::one()) {
            return Err(Error::InvalidArgument(
                "radius net needs positive radii and ratio > 1".into(),
            ));
        }
        let mut radii = Vec::new();
        let mut k = 0;
        loop {
            let s = top / ratio.powi(k);
            if s < bottom * (T::one() - T::lit(1e-12)) {
                break;
            }
            radii.push(s);
            k += 1;
        }
        Ok(Self { radii })
    }

    /// Net anchored at the grid diameter, ratio `2^(1/4)`, down to one cell.
    pub fn for_grid(grid: &Grid<T>) -> Self {
        let h = grid.cell_sizes().into_iter().fold(T::infinity(), T::min);
        Self::geometric(grid.diameter(), h, Self::default_ratio()).expect("valid grid")
    }

    /// Radii not exceeding `r`.
    pub fn up_to(&self, r: T) -> &[T] {
        let cut = r * (T::one() + T::lit(1e-12));
        let start = self.radii.partition_point(|&s| s > cut);
        &self.radii[start..]
    }
}

#[derive(Debug, Clone)]
struct Row<T> {
    offset: Vec<i64>,
    full: Option<(i64, i64)>,
    partial: Vec<(i64, T)>,
    weight: T,
}

#[derive(Debug, Clone)]
struct Stencil<T> {
    rows: Vec<Row<T>>,
    total: T,
}

fn cell_weight<T: Scalar>(offset: &[i64], h: &[T], s: T) -> T {
    let half = T::lit(0.5);
    let (mut dmin, mut dmax) = (T::zero(), T::zero());
    for (&o, &hk) in offset.iter().zip(h) {
        let c = T::lit(o.unsigned_abs() as f64) * hk;
        let near = (c - half * hk).max(T::zero());
        let far = c + half * hk;
        dmin += near * near;
        dmax += far * far;
    }
    let s2 = s * s;
    if dmax <= s2 {
        return T::one();
    }
    if dmin >= s2 {
        return T::zero();
    }
    let d = offset.len();
    let total = SUBSAMPLES.pow(d as u32);
    let mut inside = 0usize;
    let mut sub = vec![0usize; d];
    for _ in 0..total {
        let mut r2 = T::zero();
        for k in 0..d {
            let frac = (T::from_count(sub[k]) + half) / T::from_count(SUBSAMPLES) - half;
            let p = (T::lit(offset[k] as f64) + frac) * h[k];
            r2 += p * p;
        }
        if r2 <= s2 {
            inside += 1;
        }
        for k in 0..d {
            sub[k] += 1;
            if sub[k] < SUBSAMPLES {
                break;
            }
            sub[k] = 0;
        }
    }
    T::from_count(inside) / T::from_count(total)
}

fn build_stencil<T: Scalar>(h: &[T], s: T) -> Stencil<T> {
    let d = h.len();
    let reach: Vec<i64> = h
        .iter()
        .map(|&hk| (s / hk + T::lit(0.5)).ceil().to_i64().unwrap_or(0))
        .collect();
    let mut rows = Vec::new();
    let mut total = T::zero();
    let prefix_dims = d - 1;
    let mut prefix: Vec<i64> = reach[..prefix_dims].iter().map(|&m| -m).collect();
    let m_last = reach[d - 1];
    let mut offset = vec![0i64; d];
    loop {
        offset[..prefix_dims].copy_from_slice(&prefix);
        let mut full: Option<(i64, i64)> = None;
        let mut partial = Vec::new();
        let mut weight = T::zero();
        for j in -m_last..=m_last {
            offset[d - 1] = j;
            let w = cell_weight(&offset, h, s);
            if w == T::one() {
                full = Some(match full {
                    None => (j, j),
                    Some((a, _)) => (a, j),
                });
            } else if w > T::zero() {
                partial.push((j, w));
            }
            weight += w;
        }
        if weight > T::zero() {
            total += weight;
            rows.push(Row {
                offset: prefix.clone(),
                full,
                partial,
                weight,
            });
        }
        let mut k = 0;
        loop {
            if k == prefix_dims {
                return Stencil { rows, total };
            }
            prefix[k] += 1;
            if prefix[k] <= reach[k] {
                break;
            }
            prefix[k] = -reach[k];
            k += 1;
        }
    }
}

/// Precomputed stencils and prefix sums for repeated maximal evaluations.
#[derive(Debug, Clone)]
pub struct MaximalEngine<T> {
    grid: Grid<T>,
    comps: Vec<Vec<T>>,
    fills: Vec<T>,
    norm: Vec<T>,
    norm_fill: T,
    prefix: Vec<T>,
    net: RadiusNet<T>,
    stencils: Vec<Stencil<T>>,
}

impl<T: Scalar> MaximalEngine<T> {
    pub fn new(g: &ScalarGridField<T>, net: RadiusNet<T>) -> Self {
        Self::new_vector(std::slice::from_ref(g), net).expect("single component")
    }

    /// Engine for the Euclidean norm of a vector of component grids.
    pub fn new_vector(components: &[ScalarGridField<T>], net: RadiusNet<T>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("no grid components".into()))?;
        let grid = first.grid.clone();
        if components.iter().any(|c| c.grid != grid) {
            return Err(Error::InvalidArgument("component grids differ".into()));
        }
        let comps: Vec<Vec<T>> = components.iter().map(|c| c.values.clone()).collect();
        let fills: Vec<T> = components.iter().map(|c| c.fill).collect();
        let norm: Vec<T> = (0..grid.len())
            .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<T>().sqrt())
            .collect();
        let norm_fill = fills.iter().map(|&f| f * f).sum::<T>().sqrt();
        let n_last = *grid.shape.last().expect("nonempty shape");
        let rows = grid.len() / n_last;
        let mut prefix = Vec::with_capacity(rows * (n_last + 1));
        for r in 0..rows {
            let mut acc = T::zero();
            prefix.push(acc);
            for j in 0..n_last {
                acc += norm[r * n_last + j];
                prefix.push(acc);
            }
        }
        let h = grid.cell_sizes();
        let stencils = net.radii.iter().map(|&s| build_stencil(&h, s)).collect();
        Ok(Self {
            grid,
            comps,
            fills,
            norm,
            norm_fill,
            prefix,
            net,
            stencils,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn net(&self) -> &RadiusNet<T> {
        &self.net
    }

    /// Flat row index of the grid row through `idx` shifted by `offset`
    /// in the leading axes, or `None` when it leaves the grid.
    fn row_base(&self, idx: &[usize], offset: &[i64]) -> Option<usize> {
        let mut r = 0usize;
        for (k, &o) in offset.iter().enumerate() {
            let v = idx[k] as i64 + o;
            if v < 0 || v >= self.grid.shape[k] as i64 {
                return None;
            }
            r = r * self.grid.shape[k] + v as usize;
        }
        Some(r)
    }

    /// Average of `|g|` over the `k`-th net ball around cell `idx`.
    fn avg_abs(&self, idx: &[usize], k: usize) -> T {
        let st = &self.stencils[k];
        let n_last = *self.grid.shape.last().expect("shape") as i64;
        let c_last = idx[idx.len() - 1] as i64;
        let mut sum = T::zero();
        for row in &st.rows {
            let Some(r) = self.row_base(idx, &row.offset) else {
                sum += row.weight * self.norm_fill;
                continue;
            };
            if let Some((a, b)) = row.full {
                let (lo, hi) = (c_last + a, c_last + b);
                let (clo, chi) = (lo.max(0), hi.min(n_last - 1));
                if clo <= chi {
                    let base = r * (n_last as usize + 1);
                    sum += self.prefix[base + chi as usize + 1] - self.prefix[base + clo as usize];
                }
                let outside = (hi - lo + 1) - (chi - clo + 1).max(0);
                if outside > 0 {
                    sum += T::lit(outside as f64) * self.norm_fill;
                }
            }
            for &(j, w) in &row.partial {
                let col = c_last + j;
                let v = if col >= 0 && col < n_last {
                    self.norm[r * n_last as usize + col as usize]
                } else {
                    self.norm_fill
                };
                sum += w * v;
            }
        }
        sum / st.total
    }

    fn value_at(&self, flat: usize) -> Vec<T> {
        self.comps.iter().map(|c| c[flat]).collect()
    }

    fn diff_norm(&self, flat: Option<usize>, c: &[T]) -> T {
        match flat {
            Some(i) => self
                .comps
                .iter()
                .zip(c)
                .map(|(comp, &ck)| (comp[i] - ck) * (comp[i] - ck))
                .sum::<T>()
                .sqrt(),
            None => self
                .fills
                .iter()
                .zip(c)
                .map(|(&f, &ck)| (f - ck) * (f - ck))
                .sum::<T>()
                .sqrt(),
        }
    }

    /// Average of `|g - c|` over the `k`-th net ball around cell `idx`.
    fn avg_osc(&self, idx: &[usize], k: usize, c: &[T]) -> T {
        let st = &self.stencils[k];
        let n_last = *self.grid.shape.last().expect("shape") as i64;
        let c_last = idx[idx.len() - 1] as i64;
        let outside = self.diff_norm(None, c);
        let mut sum = T::zero();
        for row in &st.rows {
            let Some(r) = self.row_base(idx, &row.offset) else {
                sum += row.weight * outside;
                continue;
            };
            let base = r * n_last as usize;
            let at = |col: i64| {
                if col >= 0 && col < n_last {
                    self.diff_norm(Some(base + col as usize), c)
                } else {
                    outside
                }
            };
            if let Some((a, b)) = row.full {
                for j in a..=b {
                    sum += at(c_last + j);
                }
            }
            for &(j, w) in &row.partial {
                sum += w * at(c_last + j);
            }
        }
        sum / st.total
    }

    /// `g*` at cell `flat`.
    pub fn star_at(&self, flat: usize) -> T {
        let idx = self.grid.unravel(flat);
        (0..self.stencils.len())
            .map(|k| self.avg_abs(&idx, k))
            .fold(self.norm[flat], T::max)
    }

    /// `g^#_r` at cell `flat`.
    pub fn sharp_at(&self, flat: usize, r: T) -> T {
        let idx = self.grid.unravel(flat);
        let c = self.value_at(flat);
        let c_norm = self.norm[flat];
        let first = self.net.radii.len() - self.net.up_to(r).len();
        let mut best = T::zero();
        for k in first..self.stencils.len() {
            let osc = self.avg_osc(&idx, k, &c);
            // rounding guard: the triangle inequality bound of the same ball
            let bound = self.avg_abs(&idx, k) + c_norm;
            best = best.max(osc.min(bound));
        }
        best
    }

    pub fn star_grid(&self) -> ScalarGridField<T> {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.star_at(i))
            .collect();
        ScalarGridField {
            grid: self.grid.clone(),
            values,
            fill: T::zero(),
        }
    }

    pub fn sharp_grid(&self, r: T) -> ScalarGridField<T> {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.sharp_at(i, r))
            .collect();
        ScalarGridField {
            grid: self.grid.clone(),
            values,
            fill: T::zero(),
        }
    }

    fn cell_of(&self, x: &[T]) -> Result<usize> {
        self.grid
            .locate(x)
            .ok_or_else(|| Error::OutOfBounds(x.iter().map(|v| v.to_f64_lossy()).collect()))
    }
}

/// `g*(x)`, evaluated at the centre of the cell containing `x`.
pub fn maximal_function<T: Scalar>(
    g: &ScalarGridField<T>,
    x: &[T],
    net: Option<&RadiusNet<T>>,
) -> Result<T> {
    let net = net.cloned().unwrap_or_else(|| RadiusNet::for_grid(&g.grid));
    let engine = MaximalEngine::new(g, net);
    Ok(engine.star_at(engine.cell_of(x)?))
}

/// `g^#_r(x)`, evaluated at the centre of the cell containing `x`.
pub fn sharp_maximal_function<T: Scalar>(
    g: &ScalarGridField<T>,
    x: &[T],
    r: T,
    net: Option<&RadiusNet<T>>,
) -> Result<T> {
    let net = net.cloned().unwrap_or_else(|| RadiusNet::for_grid(&g.grid));
    let net = RadiusNet {
        radii: net.up_to(r).to_vec(),
    };
    let engine = MaximalEngine::new(g, net);
    Ok(engine.sharp_at(engine.cell_of(x)?, r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport<T> {
    pub radii: Vec<T>,
    pub norms: Vec<T>,
    /// Norms over cells whose largest ball stays inside the box.
    pub interior_norms: Vec<T>,
    pub strictly_decreasing: bool,
}

/// Grid `L^p` norms of `g^#_r` along `radii`.
pub fn sharp_maximal_decay<T: Scalar>(
    g: &ScalarGridField<T>,
    p: T,
    radii: &[T],
) -> Result<DecayReport<T>> {
    if !(p > T::one()) {
        return Err(Error::InvalidArgument(format!(
            "exponent must exceed 1, got {p}"
        )));
    }
    let top = radii.iter().copied().fold(T::zero(), T::max);
    let full = RadiusNet::for_grid(&g.grid);
    let net = RadiusNet {
        radii: full.up_to(top).to_vec(),
    };
    let engine = MaximalEngine::new(g, net);
    let interior: Vec<bool> = (0..g.grid.len())
        .map(|i| interior_cell(&g.grid, i, top))
        .collect();
    let vol = g.grid.cell_volume();
    let mut norms = Vec::with_capacity(radii.len());
    let mut interior_norms = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = engine.sharp_grid(r);
        norms.push(s.lp_norm(p));
        let inner: T = s
            .values
            .iter()
            .zip(&interior)
            .filter(|(_, &keep)| keep)
            .map(|(v, _)| v.powf(p))
            .sum();
        interior_norms.push((inner * vol).powf(T::one() / p));
    }
    let strictly_decreasing = norms.windows(2).all(|w| w[1] < w[0]);
    Ok(DecayReport {
        radii: radii.to_vec(),
        norms,
        interior_norms,
        strictly_decreasing,
    })
}

/// The cell centre is at least `r + half a cell diagonal` from the box faces.
pub fn interior_cell<T: Scalar>(grid: &Grid<T>, flat: usize, r: T) -> bool {
    let c = grid.center(flat);
    let half_diag = grid.cell_sizes().iter().map(|&h| h * h).sum::<T>().sqrt() / T::lit(2.0);
    let need = r + half_diag;
    (0..grid.dim()).all(|k| c[k] - grid.lo[k] >= need && grid.hi[k] - c[k] >= need)
}
