//! Measures on curves, the displacement residual
//! `theta_t - theta_s - (int_s^t V) (theta_s)` and its omega bound.

use rayon::prelude::*;

use crate::field::{eval_field, jacobian, DiffMethod, VectorField};
use crate::flow::{integrate_trajectory_at, FlowMethod, TimeWindow, Trajectory};
use crate::linalg;
use crate::measure::{Grid, Histogram, ParticleEnsemble};
use crate::quad::simpson_uniform;
use crate::{Error, Result, Scalar};

use super::report::{ResidualKind, ResidualReport};
use super::residual::{scaling_exponent, weighted_norm, SlopeFit};

/// Weighted family of trajectories over one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble<T> {
    pub window: TimeWindow<T>,
    pub trajectories: Vec<Trajectory<T>>,
    pub weights: Vec<T>,
    pub seed: u64,
}

impl<T: Scalar> TrajectoryEnsemble<T> {
    /// Every trajectory must start at `window.a` and end at `window.b`.
    pub fn new(
        window: TimeWindow<T>,
        trajectories: Vec<Trajectory<T>>,
        weights: Vec<T>,
        seed: u64,
    ) -> Result<Self> {
        if trajectories.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: trajectories.len(),
                got: weights.len(),
            });
        }
        if trajectories.is_empty() {
            return Err(Error::InvalidArgument("empty trajectory ensemble".into()));
        }
        let dim = trajectories[0].dim();
        for (i, tr) in trajectories.iter().enumerate() {
            let (first, last) = (tr.times[0], tr.times[tr.len() - 1]);
            if first != window.a || last != window.b {
                return Err(Error::WindowMismatch(format!(
                    "trajectory {i} covers [{first}, {last}], window is [{}, {}]",
                    window.a, window.b
                )));
            }
            if tr.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: tr.dim(),
                });
            }
        }
        Ok(Self {
            window,
            trajectories,
            weights,
            seed,
        })
    }

    /// Integral curves of `field` through the ensemble points, taken as the
    /// states at `window.a`. The window ends are always sampled.
    pub fn from_flow(
        field: &VectorField<T>,
        ens: &ParticleEnsemble<T>,
        window: TimeWindow<T>,
        sample_times: &[T],
        method: FlowMethod<T>,
    ) -> Result<Self> {
        if ens.dim != field.dim() {
            return Err(Error::DimensionMismatch {
                expected: field.dim(),
                got: ens.dim,
            });
        }
        let times = sample_grid(window, sample_times)?;
        if matches!(method, FlowMethod::AnalyticOracle)
            && field.is_time_dependent()
            && window.a != T::zero()
        {
            return Err(Error::InvalidArgument(
                "closed-form flows of time-dependent fields start at t = 0".into(),
            ));
        }
        let trajs: Vec<Result<Trajectory<T>>> = (0..ens.len())
            .into_par_iter()
            .map(|i| {
                let x0 = ens.point(i);
                match method {
                    FlowMethod::Numeric(tol) => {
                        integrate_trajectory_at(field, x0, window, tol, &times)
                    }
                    FlowMethod::AnalyticOracle => {
                        let oracle = field
                            .oracle()
                            .ok_or_else(|| Error::NoFlowOracle(field.name().to_string()))?;
                        let states = times
                            .iter()
                            .map(|&t| {
                                if t == window.a {
                                    Ok(x0.to_vec())
                                } else {
                                    oracle(x0, t - window.a).map(|o| o.point)
                                }
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Trajectory {
                            field_name: field.name().to_string(),
                            times: times.clone(),
                            states,
                            crossings: Vec::new(),
                            tolerance_used: T::zero(),
                        })
                    }
                }
            })
            .collect();
        let trajs = trajs.into_iter().collect::<Result<Vec<_>>>()?;
        Self::new(window, trajs, ens.weights.clone(), ens.seed)
    }

    /// Arbitrary curves `tau -> curve(x0, tau)` through the ensemble points,
    /// sampled like [`TrajectoryEnsemble::from_flow`].
    pub fn from_curves(
        name: &str,
        ens: &ParticleEnsemble<T>,
        window: TimeWindow<T>,
        sample_times: &[T],
        curve: impl Fn(&[T], T) -> Vec<T> + Sync,
    ) -> Result<Self> {
        let times = sample_grid(window, sample_times)?;
        let trajs: Vec<Trajectory<T>> = (0..ens.len())
            .into_par_iter()
            .map(|i| Trajectory {
                field_name: name.to_string(),
                times: times.clone(),
                states: times.iter().map(|&t| curve(ens.point(i), t)).collect(),
                crossings: Vec::new(),
                tolerance_used: T::zero(),
            })
            .collect();
        Self::new(window, trajs, ens.weights.clone(), ens.seed)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    /// `e_t` applied to every curve.
    pub fn states_at(&self, t: T) -> Vec<Vec<T>> {
        self.trajectories
            .iter()
            .map(|tr| tr.state_at(t).expect("non-empty trajectory"))
            .collect()
    }

    /// Sample times of the first trajectory.
    pub fn times(&self) -> &[T] {
        &self.trajectories[0].times
    }

    fn check_covers(&self, s: T, t: T) -> Result<()> {
        if !self.window.contains(s) || !self.window.contains(t) {
            return Err(Error::WindowMismatch(format!(
                "[{s}, {t}] is not inside [{}, {}]",
                self.window.a, self.window.b
            )));
        }
        Ok(())
    }
}

fn sample_grid<T: Scalar>(window: TimeWindow<T>, extra: &[T]) -> Result<Vec<T>> {
    if extra.iter().any(|&t| !window.contains(t)) {
        return Err(Error::WindowMismatch(
            "sample time outside the window".into(),
        ));
    }
    let mut times = vec![window.a, window.b];
    times.extend_from_slice(extra);
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    Ok(times)
}

/// Exponents with `1/p0 + 1/p1 = 1/q <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents<T> {
    pub p0: T,
    pub p1: T,
    pub q: T,
}

impl<T: Scalar> Exponents<T> {
    pub fn new(p0: T, p1: T, q: T) -> Result<Self> {
        let sum = p0.recip() + p1.recip();
        let inv_q = q.recip();
        let tol = T::lit(1e-12);
        if (sum - inv_q).abs() > tol || inv_q > T::one() + tol || !(p0 > T::one() && p1 > T::one())
        {
            return Err(Error::ExponentMismatch {
                sum: sum.to_f64_lossy(),
                inv_q: inv_q.to_f64_lossy(),
            });
        }
        Ok(Self { p0, p1, q })
    }
}

/// Grids for the space norms and for the marginal density constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundGrids<T> {
    pub norm_grid: Grid<T>,
    pub density_grid: Grid<T>,
    /// Even number of Simpson intervals for time integrals of time-dependent fields.
    pub time_intervals: usize,
}

impl<T: Scalar> BoundGrids<T> {
    /// `[-8, 8]^d` at 64 cells per axis for norms, 32 for densities.
    pub fn default_for(dim: usize) -> Self {
        Self {
            norm_grid: Grid::cube(dim, T::lit(-8.0), T::lit(8.0), 64).expect("valid grid"),
            density_grid: Grid::cube(dim, T::lit(-8.0), T::lit(8.0), 32).expect("valid grid"),
            time_intervals: 8,
        }
    }
}

pub(crate) fn diff_method<T: Scalar>(field: &VectorField<T>) -> DiffMethod<T> {
    if field.has_analytic_jacobian() {
        DiffMethod::Analytic
    } else {
        DiffMethod::central()
    }
}

/// `||f||_{L^p}` by midpoint quadrature of a pointwise magnitude.
pub(crate) fn grid_norm<T: Scalar>(
    grid: &Grid<T>,
    p: T,
    f: impl Fn(&[T]) -> Result<T> + Sync,
) -> Result<T> {
    let vals: Vec<Result<T>> = (0..grid.len())
        .into_par_iter()
        .map(|i| f(&grid.center(i)))
        .collect();
    let vals = vals.into_iter().collect::<Result<Vec<T>>>()?;
    if p.is_infinite() {
        return Ok(vals.into_iter().fold(T::zero(), T::max));
    }
    let s: T = vals.iter().map(|v| v.powf(p)).sum();
    Ok((s * grid.cell_volume()).powf(p.recip()))
}

pub fn field_norm<T: Scalar>(field: &VectorField<T>, tau: T, grid: &Grid<T>, p: T) -> Result<T> {
    grid_norm(grid, p, |x| Ok(linalg::norm(&eval_field(field, x, tau)?)))
}

/// Norm of the Frobenius norm of the Jacobian.
pub fn jacobian_norm<T: Scalar>(field: &VectorField<T>, tau: T, grid: &Grid<T>, p: T) -> Result<T> {
    let dm = diff_method(field);
    grid_norm(grid, p, |x| Ok(jacobian(field, x, tau, dm)?.frobenius()))
}

/// `tau -> ||V_tau||_{p0}` and `tau -> ||DV_tau||_{p1}` on a time grid, with
/// cumulative trapezoid integrals. Autonomous fields store one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NormProfile<T> {
    pub times: Vec<T>,
    pub v: Vec<T>,
    pub dv: Vec<T>,
    cum_v: Vec<T>,
    cum_dv: Vec<T>,
}

impl<T: Scalar> NormProfile<T> {
    pub fn build(
        field: &VectorField<T>,
        a: T,
        b: T,
        intervals: usize,
        grid: &Grid<T>,
        exps: Exponents<T>,
    ) -> Result<Self> {
        let times: Vec<T> = if field.is_time_dependent() {
            let n = intervals.max(1);
            let h = (b - a) / T::from_count(n);
            (0..=n).map(|k| a + h * T::from_count(k)).collect()
        } else {
            vec![a]
        };
        let mut v = Vec::with_capacity(times.len());
        let mut dv = Vec::with_capacity(times.len());
        for &tau in &times {
            v.push(field_norm(field, tau, grid, exps.p0)?);
            dv.push(jacobian_norm(field, tau, grid, exps.p1)?);
        }
        let cumulate = |vals: &[T]| {
            let mut c = vec![T::zero(); vals.len()];
            for k in 1..vals.len() {
                c[k] = c[k - 1] + (times[k] - times[k - 1]) * (vals[k] + vals[k - 1]) / T::lit(2.0);
            }
            c
        };
        let (cum_v, cum_dv) = (cumulate(&v), cumulate(&dv));
        Ok(Self {
            times,
            v,
            dv,
            cum_v,
            cum_dv,
        })
    }

    fn cumulative(&self, cum: &[T], vals: &[T], t: T) -> T {
        let n = self.times.len();
        if n == 1 {
            return vals[0] * (t - self.times[0]);
        }
        let k = self.times.partition_point(|&s| s < t).clamp(1, n - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        let tv = vals[k - 1] + w * (vals[k] - vals[k - 1]);
        cum[k - 1] + (t - t0) * (vals[k - 1] + tv) / T::lit(2.0)
    }

    /// `int_s^t ||V_tau||_{p0} dtau`.
    pub fn v_integral(&self, s: T, t: T) -> T {
        (self.cumulative(&self.cum_v, &self.v, t) - self.cumulative(&self.cum_v, &self.v, s)).abs()
    }

    /// `int_s^t ||DV_tau||_{p1} dtau`.
    pub fn dv_integral(&self, s: T, t: T) -> T {
        (self.cumulative(&self.cum_dv, &self.dv, t) - self.cumulative(&self.cum_dv, &self.dv, s))
            .abs()
    }

    /// `C^{1/q} (int_s^t ||V||_{p0}) (int_s^t ||DV||_{p1})`.
    pub fn omega(&self, s: T, t: T, c: T, q: T) -> T {
        c.powf(q.recip()) * self.v_integral(s, t) * self.dv_integral(s, t)
    }
}

/// Largest histogram density of the marginals `e_tau # eta` over `times`,
/// and the largest mass falling outside `grid`.
pub fn marginal_density_sup<T: Scalar>(
    ens: &TrajectoryEnsemble<T>,
    times: &[T],
    grid: &Grid<T>,
) -> Result<(T, T)> {
    let mut sup = T::zero();
    let mut outside = T::zero();
    for &tau in times {
        let coords: Vec<T> = ens.states_at(tau).concat();
        let h = Histogram::build(grid, ens.dim(), &coords, &ens.weights)?;
        sup = sup.max(h.density().max());
        outside = outside.max(h.mass_outside);
    }
    Ok((sup, outside))
}

/// `(int_s^t V_tau dtau)(x)`: exact for autonomous fields, Simpson otherwise.
pub(crate) fn time_integral_at<T: Scalar>(
    field: &VectorField<T>,
    x: &[T],
    s: T,
    t: T,
    intervals: usize,
) -> Result<Vec<T>> {
    if !field.is_time_dependent() {
        return Ok(linalg::scale(t - s, &eval_field(field, x, s)?));
    }
    let n = intervals.max(2) + intervals % 2;
    let h = (t - s) / T::from_count(n);
    let vals = (0..=n)
        .map(|k| eval_field(field, x, s + h * T::from_count(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..field.dim())
        .map(|i| {
            let comp: Vec<T> = vals.iter().map(|v| v[i]).collect();
            simpson_uniform(&comp, h)
        })
        .collect())
}

/// Per-curve `|theta_t - theta_s - (int_s^t V)(theta_s)|`.
fn displacement_residuals<T: Scalar>(
    ens: &TrajectoryEnsemble<T>,
    field: &VectorField<T>,
    s: T,
    t: T,
    intervals: usize,
) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = ens
        .trajectories
        .par_iter()
        .map(|tr| {
            let a = tr.state_at(s).expect("non-empty trajectory");
            let b = tr.state_at(t).expect("non-empty trajectory");
            let flow = time_integral_at(field, &a, s, t, intervals)?;
            let r: Vec<T> = b
                .iter()
                .zip(&a)
                .zip(&flow)
                .map(|((&y, &x), &f)| y - x - f)
                .collect();
            Ok(linalg::norm(&r))
        })
        .collect();
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport<T> {
    /// `L^q(eta)` norm of the displacement residual.
    pub lhs: T,
    pub omega_bound: T,
    /// Sup of the marginal densities over the sampled times in `[s, t]`.
    pub density_constant: T,
    pub v_integral: T,
    pub dv_integral: T,
    /// Largest marginal mass outside the density grid.
    pub mass_outside: T,
    pub sample_count: usize,
}

impl<T: Scalar> ConcentrationReport<T> {
    pub fn to_reports(&self, s: T, t: T, exps: Exponents<T>, seed: u64) -> [ResidualReport<T>; 2] {
        let base = |value: T, which: T| {
            ResidualReport::new(ResidualKind::Concentration, value, self.sample_count, seed)
                .with("s", s)
                .with("t", t)
                .with("delta", t - s)
                .with("p0", exps.p0)
                .with("p1", exps.p1)
                .with("q", exps.q)
                .with("bound", which)
        };
        [base(self.lhs, T::zero()), base(self.omega_bound, T::one())]
    }
}

fn sampled_times_in<T: Scalar>(ens: &TrajectoryEnsemble<T>, s: T, t: T) -> Vec<T> {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let mut times = vec![lo, hi];
    times.extend(ens.times().iter().copied().filter(|&x| x > lo && x < hi));
    times
}

pub fn concentration_residual<T: Scalar>(
    ens: &TrajectoryEnsemble<T>,
    field: &VectorField<T>,
    s: T,
    t: T,
    exps: Exponents<T>,
    grids: &BoundGrids<T>,
) -> Result<ConcentrationReport<T>> {
    ens.check_covers(s, t)?;
    if ens.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: ens.dim(),
        });
    }
    let resid = displacement_residuals(ens, field, s, t, grids.time_intervals)?;
    let lhs = weighted_norm(&ens.weights, &resid, exps.q);
    let (c, outside) =
        marginal_density_sup(ens, &sampled_times_in(ens, s, t), &grids.density_grid)?;
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let profile = NormProfile::build(field, lo, hi, grids.time_intervals, &grids.norm_grid, exps)?;
    Ok(ConcentrationReport {
        lhs,
        omega_bound: profile.omega(lo, hi, c, exps.q),
        density_constant: c,
        v_integral: profile.v_integral(lo, hi),
        dv_integral: profile.dv_integral(lo, hi),
        mass_outside: outside,
        sample_count: ens.len(),
    })
}

/// Partition sums of the residual and of its omega bound over dyadic
/// partitions of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationReport<T> {
    pub levels: Vec<u32>,
    pub meshes: Vec<T>,
    pub lhs_sums: Vec<T>,
    pub omega_sums: Vec<T>,
    /// Log-log slope of `omega_sums` against the mesh.
    pub fit: SlopeFit,
}

pub fn omega_variation<T: Scalar>(
    ens: &TrajectoryEnsemble<T>,
    field: &VectorField<T>,
    levels: &[u32],
    exps: Exponents<T>,
    grids: &BoundGrids<T>,
) -> Result<VariationReport<T>> {
    let (a, b) = (ens.window.a, ens.window.b);
    let max_level = levels.iter().copied().max().unwrap_or(0);
    let fine = grids.time_intervals.max(1) << max_level.min(12);
    let profile = NormProfile::build(field, a, b, fine, &grids.norm_grid, exps)?;
    let (c, _) = marginal_density_sup(ens, &sampled_times_in(ens, a, b), &grids.density_grid)?;
    let mut meshes = Vec::with_capacity(levels.len());
    let mut lhs_sums = Vec::with_capacity(levels.len());
    let mut omega_sums = Vec::with_capacity(levels.len());
    for &k in levels {
        let n = 1usize << k;
        let h = (b - a) / T::from_count(n);
        let mut lhs = T::zero();
        let mut om = T::zero();
        for i in 0..n {
            let s = a + h * T::from_count(i);
            let t = if i + 1 == n { b } else { s + h };
            let resid = displacement_residuals(ens, field, s, t, grids.time_intervals)?;
            lhs += weighted_norm(&ens.weights, &resid, exps.q);
            om += profile.omega(s, t, c, exps.q);
        }
        meshes.push(h);
        lhs_sums.push(lhs);
        omega_sums.push(om);
    }
    let fit = scaling_exponent(&meshes, &omega_sums)?;
    Ok(VariationReport {
        levels: levels.to_vec(),
        meshes,
        lhs_sums,
        omega_sums,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::catalog;
    use crate::measure::{sample_reference_measure, Source};

    fn gaussian(dim: usize, n: usize) -> ParticleEnsemble<f64> {
        sample_reference_measure(&Source::standard_gaussian(dim), n, 17, None).unwrap()
    }

    fn small_grids(dim: usize) -> BoundGrids<f64> {
        BoundGrids {
            norm_grid: Grid::cube(dim, -8.0, 8.0, 32).unwrap(),
            density_grid: Grid::cube(dim, -8.0, 8.0, 16).unwrap(),
            time_intervals: 8,
        }
    }

    #[test]
    fn exponent_checks() {
        assert!(Exponents::new(4.0, 4.0, 2.0).is_ok());
        assert!(matches!(
            Exponents::new(4.0, 4.0, 3.0),
            Err(Error::ExponentMismatch { .. })
        ));
        assert!(matches!(
            Exponents::new(1.5, 1.5, 0.75),
            Err(Error::ExponentMismatch { .. })
        ));
    }

    #[test]
    fn constant_field_has_zero_residual() {
        let c = VectorField::new("c", 2, |_: &[f64], _| vec![1.0, -2.0])
            .with_jacobian(|_, _| crate::linalg::Matrix::zeros(2, 2));
        let ens = gaussian(2, 300);
        let w = TimeWindow::new(0.0, 1.0).unwrap();
        let tr = TrajectoryEnsemble::from_curves("lines", &ens, w, &[0.25, 0.5], |x, t| {
            vec![x[0] + t, x[1] - 2.0 * t]
        })
        .unwrap();
        let r = concentration_residual(
            &tr,
            &c,
            0.25,
            0.5,
            Exponents::new(4.0, 4.0, 2.0).unwrap(),
            &small_grids(2),
        )
        .unwrap();
        assert!(r.lhs < 1e-15, "{}", r.lhs);
    }

    #[test]
    fn integral_curves_obey_the_bound() {
        let field = catalog::builtin_fields::<f64>()
            .into_iter()
            .find(|f| f.name() == "rotation2")
            .unwrap();
        let ens = gaussian(2, 4000);
        let w = TimeWindow::new(0.0, 1.0).unwrap();
        let tr = TrajectoryEnsemble::from_flow(&field, &ens, w, &[0.5], FlowMethod::AnalyticOracle)
            .unwrap();
        let exps = Exponents::new(4.0, 4.0, 2.0).unwrap();
        let r = concentration_residual(&tr, &field, 0.0, 0.5, exps, &small_grids(2)).unwrap();
        assert!(r.lhs > 0.0 && r.lhs <= r.omega_bound, "{r:?}");
    }

    #[test]
    fn profile_integrals_of_time_dependent_field() {
        let pair = catalog::pulsed_rotation_pair::<f64>();
        let grids = small_grids(3);
        let exps = Exponents::new(4.0, 4.0, 2.0).unwrap();
        let p = NormProfile::build(&pair.first, 0.0, 1.0, 16, &grids.norm_grid, exps).unwrap();
        // both norms scale with the rate 1 + sin(t)/2
        let rate_int = 1.0 + (1.0 - 1.0f64.cos()) / 2.0;
        let base = p.dv[0];
        assert!((p.dv_integral(0.0, 1.0) / base - rate_int).abs() < 1e-3);
        assert!(
            (p.dv_integral(0.0, 0.5) + p.dv_integral(0.5, 1.0) - p.dv_integral(0.0, 1.0)).abs()
                < 1e-12
        );
    }

    #[test]
    fn variation_sums_shrink_with_mesh() {
        let field = catalog::builtin_fields::<f64>()
            .into_iter()
            .find(|f| f.name() == "rotation2")
            .unwrap();
        let ens = gaussian(2, 500);
        let w = TimeWindow::new(0.0, 1.0).unwrap();
        let times: Vec<f64> = (1..128).map(|k| k as f64 / 128.0).collect();
        let tr = TrajectoryEnsemble::from_flow(&field, &ens, w, &times, FlowMethod::AnalyticOracle)
            .unwrap();
        let exps = Exponents::new(4.0, 4.0, 2.0).unwrap();
        let rep = omega_variation(&tr, &field, &[0, 2, 4, 7], exps, &small_grids(2)).unwrap();
        assert!(rep.fit.slope > 0.9, "{rep:?}");
        assert!(rep.lhs_sums.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn window_checks() {
        let ens = gaussian(2, 10);
        let w = TimeWindow::new(0.0, 1.0).unwrap();
        let tr = TrajectoryEnsemble::from_curves("still", &ens, w, &[], |x, _| x.to_vec()).unwrap();
        let zero = catalog::builtin_fields::<f64>()
            .into_iter()
            .find(|f| f.name() == "rotation2")
            .unwrap();
        let exps = Exponents::new(4.0, 4.0, 2.0).unwrap();
        let r = concentration_residual(&tr, &zero, 0.5, 1.5, exps, &small_grids(2));
        assert!(matches!(r, Err(Error::WindowMismatch(_))));
        let mut bad = tr.trajectories.clone();
        bad[0].times[0] = 0.1;
        assert!(matches!(
            TrajectoryEnsemble::new(w, bad, tr.weights.clone(), 0),
            Err(Error::WindowMismatch(_))
        ));
    }
}
