//! Pointwise Sobolev inequality audits on sampled functions.

use rand::Rng;
use rayon::prelude::*;

use crate::field::ScalarFn;
use crate::{Error, Result, Scalar};

use super::ensemble::stream_rng;
use super::maximal::{MaximalEngine, RadiusNet};
use super::{Grid, ScalarGridField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevOrder {
    /// `|f(y)-f(x)-Df(x)h| <= |h| (|Df|#_|h|(y) + |Df|#_|h|(x))`
    FirstSharp,
    /// `|f(y)-f(x)| <= |h| (|Df|*(y) + |Df|*(x))`
    FirstStar,
    /// second-order Taylor remainder against `|h|^2 (|D^2f|*(y) + |D^2f|*(x))`
    Second,
}

impl std::str::FromStr for SobolevOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_sharp" => Ok(Self::FirstSharp),
            "first_star" => Ok(Self::FirstStar),
            "second" => Ok(Self::Second),
            other => Err(Error::InvalidArgument(format!("unknown order `{other}`"))),
        }
    }
}

/// A function with its gradient and (optionally) Hessian sampled on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevGrids<T> {
    pub f: ScalarGridField<T>,
    pub gradient: Vec<ScalarGridField<T>>,
    /// Row-major `d x d` Hessian entries.
    pub hessian: Option<Vec<ScalarGridField<T>>>,
}

impl<T: Scalar> SobolevGrids<T> {
    pub fn from_fn(f: &ScalarFn<T>, grid: &Grid<T>) -> Result<Self> {
        let d = grid.dim();
        if f.dim != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: f.dim,
            });
        }
        let values = ScalarGridField::from_fn(grid.clone(), |x| f.value(x))?;
        let grads: Vec<Vec<T>> = (0..grid.len())
            .into_par_iter()
            .map(|i| f.gradient(&grid.center(i)))
            .collect();
        let gradient = (0..d)
            .map(|k| ScalarGridField::new(grid.clone(), grads.iter().map(|g| g[k]).collect()))
            .collect::<Result<Vec<_>>>()?;
        let hessian = if f.has_hessian() {
            let hs: Vec<Vec<T>> = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    f.hessian(&grid.center(i))
                        .expect("hessian present")
                        .as_slice()
                        .to_vec()
                })
                .collect();
            Some(
                (0..d * d)
                    .map(|k| ScalarGridField::new(grid.clone(), hs.iter().map(|h| h[k]).collect()))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            f: values,
            gradient,
            hessian,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.f.grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevAudit<T> {
    pub order: SobolevOrder,
    pub ratios: Vec<T>,
    /// Empirical constant: the largest LHS/RHS ratio.
    pub max_ratio: T,
    pub mean_ratio: T,
    pub max_lhs: T,
    pub pairs_used: usize,
    /// Pairs whose right-hand side vanished.
    pub zero_denominator: usize,
    pub excluded: usize,
    /// Second order only: the first-order remainder over the same right-hand side.
    pub first_remainder_max_ratio: Option<T>,
}

/// Ratios LHS/RHS of the selected inequality at `pairs`, both points snapped
/// to cell centres. Points for which `exclude` holds are skipped.
pub fn sobolev_pointwise_audit<T: Scalar>(
    grids: &SobolevGrids<T>,
    order: SobolevOrder,
    pairs: &[(Vec<T>, Vec<T>)],
    exclude: Option<&(dyn Fn(&[T]) -> bool + Sync)>,
) -> Result<SobolevAudit<T>> {
    let grid = grids.grid();
    let d = grid.dim();
    let net = RadiusNet::for_grid(grid);
    let engine = match order {
        SobolevOrder::FirstSharp | SobolevOrder::FirstStar => {
            MaximalEngine::new_vector(&grids.gradient, net)?
        }
        SobolevOrder::Second => {
            let h = grids.hessian.as_ref().ok_or_else(|| {
                Error::InvalidArgument("second-order audit needs Hessian grids".into())
            })?;
            MaximalEngine::new_vector(h, net)?
        }
    };
    let mut cells = Vec::with_capacity(pairs.len());
    for (x, y) in pairs {
        let oob = |p: &[T]| Error::OutOfBounds(p.iter().map(|v| v.to_f64_lossy()).collect());
        let ix = grid.locate(x).ok_or_else(|| oob(x))?;
        let iy = grid.locate(y).ok_or_else(|| oob(y))?;
        cells.push((ix, iy));
    }
    let star: Option<ScalarGridField<T>> = match order {
        SobolevOrder::FirstSharp => None,
        _ => {
            let mut needed: Vec<usize> = cells.iter().flat_map(|&(a, b)| [a, b]).collect();
            needed.sort_unstable();
            needed.dedup();
            let vals: Vec<(usize, T)> =
                needed.par_iter().map(|&i| (i, engine.star_at(i))).collect();
            let mut s = ScalarGridField::constant(grid.clone(), T::zero());
            for (i, v) in vals {
                s.values[i] = v;
            }
            Some(s)
        }
    };

    struct Row<T> {
        lhs: T,
        rhs: T,
        first: T,
        excluded: bool,
    }
    let rows: Vec<Row<T>> = cells
        .par_iter()
        .map(|&(ix, iy)| {
            let cx = grid.center(ix);
            let cy = grid.center(iy);
            if exclude.is_some_and(|e| e(&cx) || e(&cy)) {
                return Row {
                    lhs: T::zero(),
                    rhs: T::zero(),
                    first: T::zero(),
                    excluded: true,
                };
            }
            let h: Vec<T> = cy.iter().zip(&cx).map(|(&a, &b)| a - b).collect();
            let hn = h.iter().map(|&v| v * v).sum::<T>().sqrt();
            let fx = grids.f.values[ix];
            let fy = grids.f.values[iy];
            let lin: T = (0..d).map(|k| grids.gradient[k].values[ix] * h[k]).sum();
            let first = fy - fx - lin;
            let (lhs, rhs) = match order {
                SobolevOrder::FirstSharp => (
                    first.abs(),
                    hn * (engine.sharp_at(iy, hn) + engine.sharp_at(ix, hn)),
                ),
                SobolevOrder::FirstStar => {
                    let s = star.as_ref().expect("star grid");
                    ((fy - fx).abs(), hn * (s.values[iy] + s.values[ix]))
                }
                SobolevOrder::Second => {
                    let hess = grids.hessian.as_ref().expect("hessian grids");
                    let mut quad = T::zero();
                    for i in 0..d {
                        for j in 0..d {
                            quad += h[i] * hess[i * d + j].values[ix] * h[j];
                        }
                    }
                    let s = star.as_ref().expect("star grid");
                    (
                        (first - quad / T::lit(2.0)).abs(),
                        hn * hn * (s.values[iy] + s.values[ix]),
                    )
                }
            };
            Row {
                lhs,
                rhs,
                first: first.abs(),
                excluded: false,
            }
        })
        .collect();

    let mut ratios = Vec::new();
    let mut first_ratios = T::zero();
    let (mut max_lhs, mut zero_denominator, mut excluded) = (T::zero(), 0usize, 0usize);
    for r in &rows {
        if r.excluded {
            excluded += 1;
            continue;
        }
        max_lhs = max_lhs.max(r.lhs);
        if !(r.rhs > T::zero()) {
            zero_denominator += 1;
            continue;
        }
        ratios.push(r.lhs / r.rhs);
        first_ratios = first_ratios.max(r.first / r.rhs);
    }
    let max_ratio = ratios.iter().copied().fold(T::zero(), T::max);
    let mean_ratio = if ratios.is_empty() {
        T::zero()
    } else {
        ratios.iter().copied().sum::<T>() / T::from_count(ratios.len())
    };
    Ok(SobolevAudit {
        order,
        pairs_used: ratios.len(),
        ratios,
        max_ratio,
        mean_ratio,
        max_lhs,
        zero_denominator,
        excluded,
        first_remainder_max_ratio: (order == SobolevOrder::Second).then_some(first_ratios),
    })
}

/// `n` point pairs in the box shrunk by `margin`, with separations drawn
/// uniformly from `[sep_lo, sep_hi]` in uniformly random directions.
/// Pairs whose second point leaves the shrunk box are redrawn.
pub fn sample_pairs<T: Scalar>(
    grid: &Grid<T>,
    n: usize,
    seed: u64,
    sep_lo: T,
    sep_hi: T,
    margin: T,
) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    let d = grid.dim();
    if !(sep_lo > T::zero() && sep_lo <= sep_hi) {
        return Err(Error::InvalidArgument("need 0 < sep_lo <= sep_hi".into()));
    }
    let lo: Vec<T> = grid.lo.iter().map(|&v| v + margin).collect();
    let hi: Vec<T> = grid.hi.iter().map(|&v| v - margin).collect();
    if lo.iter().zip(&hi).any(|(&a, &b)| !(a < b)) {
        return Err(Error::RegionEmpty("margin leaves no room for pairs".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            for _ in 0..10_000 {
                let x: Vec<T> = (0..d)
                    .map(|k| lo[k] + (hi[k] - lo[k]) * T::lit(rng.random::<f64>()))
                    .collect();
                let mut dir: Vec<T> = (0..d)
                    .map(|_| T::lit(rng.sample::<f64, _>(rand_distr::StandardNormal)))
                    .collect();
                let nrm = dir.iter().map(|&v| v * v).sum::<T>().sqrt();
                if nrm == T::zero() {
                    continue;
                }
                let sep = sep_lo + (sep_hi - sep_lo) * T::lit(rng.random::<f64>());
                for v in &mut dir {
                    *v = *v / nrm * sep;
                }
                let y: Vec<T> = x.iter().zip(&dir).map(|(&a, &b)| a + b).collect();
                if y.iter()
                    .zip(lo.iter().zip(&hi))
                    .all(|(&v, (&a, &b))| v >= a && v <= b)
                {
                    return Ok((x, y));
                }
            }
            Err(Error::RegionEmpty("could not place a pair".into()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn grid(n: usize) -> Grid<f64> {
        Grid::cube(2, -1.5, 1.5, n).unwrap()
    }

    #[test]
    fn linear_has_zero_first_order_remainder() {
        let f = ScalarFn::linear(vec![0.7, -1.3], 0.2);
        let g = SobolevGrids::from_fn(&f, &grid(32)).unwrap();
        let pairs = sample_pairs(g.grid(), 300, 1, 0.1, 0.4, 0.2).unwrap();
        let a = sobolev_pointwise_audit(&g, SobolevOrder::FirstSharp, &pairs, None).unwrap();
        assert!(a.max_lhs < 1e-14, "{}", a.max_lhs);
    }

    #[test]
    fn quadratic_has_zero_second_order_remainder() {
        let q = Matrix::from_f64_rows(&[&[1.0, 0.3], &[0.3, -0.5]]);
        let f = ScalarFn::quadratic(q, vec![0.1, 0.2]);
        let g = SobolevGrids::from_fn(&f, &grid(32)).unwrap();
        let pairs = sample_pairs(g.grid(), 300, 2, 0.1, 0.4, 0.2).unwrap();
        let a = sobolev_pointwise_audit(&g, SobolevOrder::Second, &pairs, None).unwrap();
        assert!(a.max_lhs < 1e-13, "{}", a.max_lhs);
        assert!(a.first_remainder_max_ratio.unwrap() > 0.0);
    }

    #[test]
    fn bump_constants_are_finite() {
        let f = ScalarFn::bump(2, 1.0);
        let g = SobolevGrids::from_fn(&f, &grid(32)).unwrap();
        let pairs = sample_pairs(g.grid(), 200, 3, 0.1, 0.4, 0.2).unwrap();
        for order in [
            SobolevOrder::FirstSharp,
            SobolevOrder::FirstStar,
            SobolevOrder::Second,
        ] {
            let a = sobolev_pointwise_audit(&g, order, &pairs, None).unwrap();
            assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0, "{order:?}");
        }
    }

    #[test]
    fn pairs_outside_are_rejected() {
        let f = ScalarFn::linear(vec![1.0, 0.0], 0.0);
        let g = SobolevGrids::from_fn(&f, &grid(8)).unwrap();
        let pairs = vec![(vec![0.0, 0.0], vec![5.0, 0.0])];
        let r = sobolev_pointwise_audit(&g, SobolevOrder::FirstStar, &pairs, None);
        assert!(matches!(r, Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn exclusion_skips_pairs() {
        let f = ScalarFn::linear(vec![1.0, 0.0], 0.0);
        let g = SobolevGrids::from_fn(&f, &grid(8)).unwrap();
        let pairs = sample_pairs(g.grid(), 50, 4, 0.1, 0.4, 0.2).unwrap();
        let all = |_: &[f64]| true;
        let a = sobolev_pointwise_audit(&g, SobolevOrder::FirstStar, &pairs, Some(&all)).unwrap();
        assert_eq!(a.excluded, 50);
    }
}
