//! Push-forward histograms and compressibility estimates.

use rayon::prelude::*;

use crate::field::VectorField;
use crate::flow::{flow_map, FlowMethod};
use crate::{Error, Result, Scalar};

use super::{Grid, ParticleEnsemble, ScalarGridField};

/// Ensemble after transport by a flow map. Failed points are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Transported<T> {
    pub dim: usize,
    pub coords: Vec<T>,
    pub weights: Vec<T>,
    pub failed: usize,
    pub lost_mass: T,
    /// Points whose path met a singular plane.
    pub crossed: usize,
}

pub fn transport<T: Scalar>(
    ens: &ParticleEnsemble<T>,
    field: &VectorField<T>,
    duration: T,
    method: FlowMethod<T>,
) -> Result<Transported<T>> {
    if ens.dim != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: ens.dim,
        });
    }
    let moved: Vec<Option<(Vec<T>, bool)>> = (0..ens.len())
        .into_par_iter()
        .map(|i| {
            flow_map(field, ens.point(i), duration, method)
                .ok()
                .filter(|o| o.point.iter().all(|v| v.is_finite()))
                .map(|o| (o.point, o.crossed))
        })
        .collect();
    let mut out = Transported {
        dim: ens.dim,
        coords: Vec::with_capacity(ens.coords.len()),
        weights: Vec::with_capacity(ens.len()),
        failed: 0,
        lost_mass: T::zero(),
        crossed: 0,
    };
    for (m, &w) in moved.into_iter().zip(&ens.weights) {
        match m {
            Some((p, crossed)) => {
                out.coords.extend_from_slice(&p);
                out.weights.push(w);
                out.crossed += usize::from(crossed);
            }
            None => {
                out.failed += 1;
                out.lost_mass += w;
            }
        }
    }
    if out.weights.is_empty() {
        return Err(Error::AllPointsLost);
    }
    Ok(out)
}

/// Weighted cell counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    pub grid: Grid<T>,
    pub mass: Vec<T>,
    pub counts: Vec<u64>,
    pub mass_inside: T,
    pub mass_outside: T,
}

impl<T: Scalar> Histogram<T> {
    pub fn build(grid: &Grid<T>, dim: usize, coords: &[T], weights: &[T]) -> Result<Self> {
        if dim != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: dim,
            });
        }
        let mut mass = vec![T::zero(); grid.len()];
        let mut counts = vec![0u64; grid.len()];
        let mut outside = T::zero();
        for (p, &w) in coords.chunks_exact(dim).zip(weights) {
            match grid.locate(p) {
                Some(i) => {
                    mass[i] += w;
                    counts[i] += 1;
                }
                None => outside += w,
            }
        }
        let inside = mass.iter().copied().sum();
        Ok(Self {
            grid: grid.clone(),
            mass,
            counts,
            mass_inside: inside,
            mass_outside: outside,
        })
    }

    /// Mass per unit volume in each cell.
    pub fn density(&self) -> ScalarGridField<T> {
        let vol = self.grid.cell_volume();
        ScalarGridField {
            grid: self.grid.clone(),
            values: self.mass.iter().map(|&m| m / vol).collect(),
            fill: T::zero(),
        }
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardDensity<T> {
    pub density: ScalarGridField<T>,
    pub counts: Vec<u64>,
    pub mass_in_grid: T,
    pub mass_outside: T,
    pub mass_lost: T,
    pub failed: usize,
}

/// Histogram density of `F_duration # ens` on `grid`.
pub fn pushforward_density<T: Scalar>(
    ens: &ParticleEnsemble<T>,
    field: &VectorField<T>,
    duration: T,
    method: FlowMethod<T>,
    grid: &Grid<T>,
) -> Result<PushforwardDensity<T>> {
    let moved = transport(ens, field, duration, method)?;
    let h = Histogram::build(grid, moved.dim, &moved.coords, &moved.weights)?;
    Ok(PushforwardDensity {
        density: h.density(),
        counts: h.counts,
        mass_in_grid: h.mass_inside,
        mass_outside: h.mass_outside,
        mass_lost: moved.lost_mass,
        failed: moved.failed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressibilityReport<T> {
    pub times: Vec<T>,
    /// Sup of the push-forward density divided by the sup of the initial one.
    pub density_sup: Vec<T>,
    /// Sup of the push-forward density itself.
    pub pushed_sup: Vec<T>,
    pub initial_sup: T,
    /// Largest ratio over the reported times.
    pub c_estimate: T,
    /// `4 / sqrt(count in the fullest initial bin)`.
    pub tolerance: T,
    pub bin_count: usize,
    pub sample_count: usize,
    pub max_initial_count: u64,
    pub failed: Vec<usize>,
}

/// Ratio of histogram sups before and after transport, one per time.
pub fn compressibility_estimate<T: Scalar>(
    field: &VectorField<T>,
    ens: &ParticleEnsemble<T>,
    times: &[T],
    method: FlowMethod<T>,
    grid: &Grid<T>,
) -> Result<CompressibilityReport<T>> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no times requested".into()));
    }
    let initial = Histogram::build(grid, ens.dim, &ens.coords, &ens.weights)?;
    let initial_sup = initial.density().max();
    if !(initial_sup > T::zero()) {
        return Err(Error::RegionEmpty(
            "no ensemble mass inside the grid".into(),
        ));
    }
    let max_initial_count = initial.max_count();
    let mut density_sup = Vec::with_capacity(times.len());
    let mut pushed_sup = Vec::with_capacity(times.len());
    let mut failed = Vec::with_capacity(times.len());
    for &t in times {
        let pf = pushforward_density(ens, field, t, method, grid)?;
        let sup = pf.density.max();
        pushed_sup.push(sup);
        density_sup.push(sup / initial_sup);
        failed.push(pf.failed);
    }
    let c_estimate = density_sup.iter().copied().fold(T::zero(), T::max);
    Ok(CompressibilityReport {
        times: times.to_vec(),
        density_sup,
        pushed_sup,
        initial_sup,
        c_estimate,
        tolerance: T::lit(4.0) / T::lit(max_initial_count as f64).sqrt(),
        bin_count: grid.len(),
        sample_count: ens.len(),
        max_initial_count,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::catalog;
    use crate::measure::{sample_reference_measure, Source};

    #[test]
    fn identity_flow_on_uniform_box() {
        let src = Source::uniform_box(vec![0.0; 2], vec![1.0; 2]);
        let n = 200_000;
        let ens = sample_reference_measure(&src, n, 5, None).unwrap();
        let id = VectorField::new("zero2", 2, |_: &[f64], _| vec![0.0, 0.0]);
        let grid = Grid::cube(2, 0.0, 1.0, 10).unwrap();
        let pf = pushforward_density(&ens, &id, 1.0, FlowMethod::Numeric(1e-8), &grid).unwrap();
        let per_cell = n as f64 / 100.0;
        let tol = 5.0 / per_cell.sqrt();
        assert!(pf.density.values.iter().all(|&d| (d - 1.0).abs() < tol));
        assert!((pf.mass_in_grid - 1.0).abs() < 1e-9);
    }

    #[test]
    fn translation_conserves_mass() {
        let ens = sample_reference_measure(&Source::<f64>::standard_gaussian(3), 20_000, 2, None)
            .unwrap();
        let rot = catalog::rotation_pair::<f64>();
        let grid = Grid::cube(3, -6.0, 6.0, 16).unwrap();
        let pf =
            pushforward_density(&ens, &rot.second, 1.5, FlowMethod::AnalyticOracle, &grid).unwrap();
        assert_eq!(pf.failed, 0);
        assert_eq!(
            pf.counts.iter().sum::<u64>() as usize,
            20_000 - outside_count(&ens, &grid, 1.5)
        );
        assert!((pf.mass_in_grid + pf.mass_outside - 1.0).abs() < 1e-12);
    }

    fn outside_count(ens: &ParticleEnsemble<f64>, grid: &Grid<f64>, dz: f64) -> usize {
        ens.points()
            .filter(|p| !grid.contains(&[p[0], p[1], p[2] + dz]))
            .count()
    }

    #[test]
    fn saddle_is_incompressible() {
        let saddle = catalog::builtin_fields::<f64>()
            .into_iter()
            .find(|f| f.name() == "saddle")
            .unwrap();
        let ens =
            sample_reference_measure(&Source::standard_gaussian(2), 200_000, 9, None).unwrap();
        let grid = Grid::cube(2, -4.0, 4.0, 32).unwrap();
        let r = compressibility_estimate(
            &saddle,
            &ens,
            &[0.25, 0.5],
            FlowMethod::AnalyticOracle,
            &grid,
        )
        .unwrap();
        assert!((r.c_estimate - 1.0).abs() < r.tolerance, "{r:?}");
    }

    #[test]
    fn dilation_shrinks_density() {
        let dil = catalog::builtin_fields::<f64>()
            .into_iter()
            .find(|f| f.name() == "dilation")
            .unwrap();
        let ens =
            sample_reference_measure(&Source::standard_gaussian(3), 200_000, 4, None).unwrap();
        let grid = Grid::cube(3, -8.0, 8.0, 32).unwrap();
        let t = 0.3;
        let r =
            compressibility_estimate(&dil, &ens, &[t], FlowMethod::AnalyticOracle, &grid).unwrap();
        let expected = (-3.0 * t).exp();
        assert!(
            (r.density_sup[0] - expected).abs() < 2.0 * r.tolerance,
            "{r:?}"
        );
        assert!(r.c_estimate <= 1.0);
    }

    #[test]
    fn all_lost() {
        let blow = VectorField::new("blow", 1, |x: &[f64], _| vec![x[0] * x[0]]);
        let ens = ParticleEnsemble::from_points(&[vec![1.0]], 0, "manual").unwrap();
        let r = transport(&ens, &blow, 5.0, FlowMethod::Numeric(1e-8));
        assert_eq!(r.unwrap_err(), Error::AllPointsLost);
    }
}
