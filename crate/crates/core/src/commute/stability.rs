//! `Phi^delta(x) = log(1 + |x| / delta)` and the quantitative stability
//! estimate comparing integral-curve ensembles of two fields.

use rayon::prelude::*;

use crate::field::{eval_field, jacobian, VectorField};
use crate::linalg;
use crate::measure::Grid;
use crate::quad::simpson_uniform;
use crate::{Error, Result, Scalar};

use super::concentration::{
    diff_method, marginal_density_sup, BoundGrids, Exponents, NormProfile, TrajectoryEnsemble,
};
use super::report::{ResidualKind, ResidualReport};

pub fn phi_delta<T: Scalar>(x: &[T], delta: T) -> Result<T> {
    if !(delta > T::zero()) {
        return Err(Error::NonpositiveDelta(delta.to_f64_lossy()));
    }
    Ok((linalg::norm(x) / delta).ln_1p())
}

/// Right side of `Phi(y) <= Phi(x) + |y - x| / (delta + |x|)`.
pub fn phi_delta_increment_bound<T: Scalar>(x: &[T], y: &[T], delta: T) -> Result<T> {
    Ok(phi_delta(x, delta)? + linalg::dist(x, y) / (delta + linalg::norm(x)))
}

/// `base + c`, sharing the Jacobian of `base`.
pub fn perturbed_field<T: Scalar>(base: &VectorField<T>, c: Vec<T>) -> VectorField<T> {
    let (b1, b2) = (base.clone(), base.clone());
    let dm = diff_method(base);
    let name = format!("{}+c", base.name());
    VectorField::new(name, base.dim(), move |x: &[T], t| {
        let v = eval_field(&b1, x, t).unwrap_or_else(|_| vec![T::nan(); x.len()]);
        linalg::add(&v, &c)
    })
    .with_jacobian(move |x: &[T], t| {
        jacobian(&b2, x, t, dm)
            .unwrap_or_else(|_| linalg::Matrix::from_fn(x.len(), x.len(), |_, _| T::nan()))
    })
    .with_singular_set(base.singular_set().clone())
    .time_dependent(base.is_time_dependent())
}

/// How curves of the two ensembles are paired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coupling {
    /// Curve `i` with curve `i`.
    Identity,
    /// Explicit `(i, j)` index pairs, each weighted by the first ensemble's weight.
    Pairs(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityAudit<T> {
    /// `|| sup_i Phi^delta(theta1_{t_i} - theta2_{t_i}) ||_{L^q}`.
    pub lhs: T,
    pub initial_term: T,
    /// `sum_i || D int V1 ||_{p1}`.
    pub jacobian_term: T,
    /// `(1/delta) sum_i || int (V1 - V2) ||_{p0}`.
    pub difference_term: T,
    /// `(1/delta) sum_i (omega1 + omega2)`.
    pub omega_term: T,
    pub rhs_total: T,
    pub ratio: T,
    pub density_constants: [T; 2],
    pub pairs: usize,
}

impl<T: Scalar> StabilityAudit<T> {
    pub fn to_report(
        &self,
        delta: T,
        intervals: usize,
        exps: Exponents<T>,
        seed: u64,
    ) -> ResidualReport<T> {
        ResidualReport::new(ResidualKind::Stability, self.lhs, self.pairs, seed)
            .with("delta", delta)
            .with("intervals", T::from_count(intervals))
            .with("p0", exps.p0)
            .with("p1", exps.p1)
            .with("q", exps.q)
            .with("rhs_total", self.rhs_total)
            .with("ratio", self.ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpec<T> {
    /// `t_0 < t_1 < ... < t_n`, inside the shared window.
    pub partition: Vec<T>,
    pub delta: T,
    pub exponents: Exponents<T>,
    pub coupling: Coupling,
    pub grids: BoundGrids<T>,
}

/// `|| int_s^t g_tau dtau ||_{L^p}` over the grid for a vector-valued
/// integrand, Simpson in time unless `autonomous`.
fn integrated_norm<T: Scalar>(
    grid: &Grid<T>,
    p: T,
    s: T,
    t: T,
    intervals: usize,
    autonomous: bool,
    g: impl Fn(&[T], T) -> Result<Vec<T>> + Sync,
) -> Result<T> {
    let n = if autonomous {
        0
    } else {
        intervals.max(2) + intervals % 2
    };
    let h = if n == 0 {
        T::zero()
    } else {
        (t - s) / T::from_count(n)
    };
    let vals: Vec<Result<T>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.center(i);
            let integral = if n == 0 {
                linalg::scale(t - s, &g(&x, s)?)
            } else {
                let samples = (0..=n)
                    .map(|k| g(&x, s + h * T::from_count(k)))
                    .collect::<Result<Vec<_>>>()?;
                (0..samples[0].len())
                    .map(|c| {
                        let comp: Vec<T> = samples.iter().map(|v| v[c]).collect();
                        simpson_uniform(&comp, h)
                    })
                    .collect()
            };
            Ok(linalg::norm(&integral))
        })
        .collect();
    let vals = vals.into_iter().collect::<Result<Vec<T>>>()?;
    if p.is_infinite() {
        return Ok(vals.into_iter().fold(T::zero(), T::max));
    }
    let sum: T = vals.iter().map(|v| v.powf(p)).sum();
    Ok((sum * grid.cell_volume()).powf(p.recip()))
}

pub fn stability_bound_audit<T: Scalar>(
    ens1: &TrajectoryEnsemble<T>,
    ens2: &TrajectoryEnsemble<T>,
    v1: &VectorField<T>,
    v2: &VectorField<T>,
    spec: &StabilitySpec<T>,
) -> Result<StabilityAudit<T>> {
    if ens1.window != ens2.window {
        return Err(Error::WindowMismatch(format!(
            "[{}, {}] vs [{}, {}]",
            ens1.window.a, ens1.window.b, ens2.window.a, ens2.window.b
        )));
    }
    let part = &spec.partition;
    if part.len() < 2 || part.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "partition needs at least two strictly increasing times".into(),
        ));
    }
    if part.iter().any(|&t| !ens1.window.contains(t)) {
        return Err(Error::WindowMismatch(
            "partition leaves the trajectory window".into(),
        ));
    }
    if v1.dim() != v2.dim() || ens1.dim() != v1.dim() || ens2.dim() != v1.dim() {
        return Err(Error::DimensionMismatch {
            expected: v1.dim(),
            got: ens2.dim(),
        });
    }
    let delta = spec.delta;
    if !(delta > T::zero()) {
        return Err(Error::NonpositiveDelta(delta.to_f64_lossy()));
    }
    let exps = spec.exponents;
    let pairs: Vec<(usize, usize)> = match &spec.coupling {
        Coupling::Identity => {
            if ens1.len() != ens2.len() {
                return Err(Error::InvalidArgument(
                    "identity coupling needs ensembles of equal size".into(),
                ));
            }
            (0..ens1.len()).map(|i| (i, i)).collect()
        }
        Coupling::Pairs(p) => {
            if p.iter().any(|&(i, j)| i >= ens1.len() || j >= ens2.len()) {
                return Err(Error::InvalidArgument("coupling index out of range".into()));
            }
            p.clone()
        }
    };

    let s1: Vec<Vec<Vec<T>>> = part.iter().map(|&t| ens1.states_at(t)).collect();
    let s2: Vec<Vec<Vec<T>>> = part.iter().map(|&t| ens2.states_at(t)).collect();
    let mut sup_vals = Vec::with_capacity(pairs.len());
    let mut init_vals = Vec::with_capacity(pairs.len());
    let mut weights = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let mut sup = T::zero();
        for k in 0..part.len() {
            let phi = phi_delta(&linalg::sub(&s1[k][i], &s2[k][j]), delta)?;
            if k == 0 {
                init_vals.push(phi);
            }
            sup = sup.max(phi);
        }
        sup_vals.push(sup);
        weights.push(ens1.weights[i]);
    }
    let q = exps.q;
    let lq = |vals: &[T]| super::residual::weighted_norm(&weights, vals, q);
    let lhs = lq(&sup_vals);
    let initial_term = lq(&init_vals);

    let grids = &spec.grids;
    let autonomous = !v1.is_time_dependent() && !v2.is_time_dependent();
    let dm = diff_method(v1);
    let (a, b) = (part[0], part[part.len() - 1]);
    let n_int = part.len() - 1;
    let profile_steps = grids.time_intervals.max(1) * n_int;
    let prof1 = NormProfile::build(v1, a, b, profile_steps, &grids.norm_grid, exps)?;
    let prof2 = NormProfile::build(v2, a, b, profile_steps, &grids.norm_grid, exps)?;
    let (c1, _) = marginal_density_sup(ens1, part, &grids.density_grid)?;
    let (c2, _) = marginal_density_sup(ens2, part, &grids.density_grid)?;

    let mut jacobian_term = T::zero();
    let mut diff_sum = T::zero();
    let mut omega_sum = T::zero();
    for w in part.windows(2) {
        let (s, t) = (w[0], w[1]);
        jacobian_term += integrated_norm(
            &grids.norm_grid,
            exps.p1,
            s,
            t,
            grids.time_intervals,
            autonomous,
            |x, tau| Ok(jacobian(v1, x, tau, dm)?.as_slice().to_vec()),
        )?;
        diff_sum += integrated_norm(
            &grids.norm_grid,
            exps.p0,
            s,
            t,
            grids.time_intervals,
            autonomous,
            |x, tau| {
                Ok(linalg::sub(
                    &eval_field(v1, x, tau)?,
                    &eval_field(v2, x, tau)?,
                ))
            },
        )?;
        omega_sum += prof1.omega(s, t, c1, q) + prof2.omega(s, t, c2, q);
    }
    let difference_term = diff_sum / delta;
    let omega_term = omega_sum / delta;
    let rhs_total = initial_term + jacobian_term + difference_term + omega_term;
    let ratio = if rhs_total > T::zero() {
        lhs / rhs_total
    } else if lhs == T::zero() {
        T::zero()
    } else {
        T::infinity()
    };
    Ok(StabilityAudit {
        lhs,
        initial_term,
        jacobian_term,
        difference_term,
        omega_term,
        rhs_total,
        ratio,
        density_constants: [c1, c2],
        pairs: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::catalog;
    use crate::flow::{FlowMethod, FlowOutcome, TimeWindow};
    use crate::measure::{sample_reference_measure, stream_rng, ParticleEnsemble, Source};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn phi_values() {
        assert_eq!(phi_delta(&[0.0, 0.0], 1.0).unwrap(), 0.0);
        let e1 = std::f64::consts::E - 1.0;
        assert!((phi_delta(&[e1], 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(phi_delta(&[1.0], 0.0), Err(Error::NonpositiveDelta(0.0)));
        assert!(phi_delta(&[1.0], -1.0).is_err());
    }

    #[test]
    fn increment_inequality_on_random_triples() {
        let mut rng = stream_rng(99, 0);
        let mut violations = 0;
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let delta = 10f64.powf(rng.random_range(-3.0..3.0));
            if phi_delta(&y, delta).unwrap() > phi_delta_increment_bound(&x, &y, delta).unwrap() {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    proptest! {
        #[test]
        fn increment_inequality(x in prop::collection::vec(-5.0f64..5.0, 2),
                                y in prop::collection::vec(-5.0f64..5.0, 2),
                                ld in -4.0f64..2.0) {
            let delta = 10f64.powf(ld);
            prop_assert!(phi_delta(&y, delta).unwrap() <= phi_delta_increment_bound(&x, &y, delta).unwrap());
        }
    }

    fn lift_and_shifted(c: f64) -> (VectorField<f64>, VectorField<f64>) {
        let v1 = catalog::windowed_swirl_pair::<f64>().second;
        let w = |p: &[f64]| (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp();
        let v2 = perturbed_field(&v1, vec![0.0, 0.0, c]).with_oracle(move |p: &[f64], t| {
            Ok(FlowOutcome::uncrossed(vec![
                p[0],
                p[1],
                p[2] + (w(p) + c) * t,
            ]))
        });
        (v1, v2)
    }

    fn grids() -> BoundGrids<f64> {
        BoundGrids {
            norm_grid: Grid::cube(3, -8.0, 8.0, 24).unwrap(),
            density_grid: Grid::cube(3, -8.0, 8.0, 16).unwrap(),
            time_intervals: 4,
        }
    }

    fn ensembles(
        v1: &VectorField<f64>,
        v2: &VectorField<f64>,
        ens: &ParticleEnsemble<f64>,
        part: &[f64],
    ) -> (TrajectoryEnsemble<f64>, TrajectoryEnsemble<f64>) {
        let w = TimeWindow::new(part[0], part[part.len() - 1]).unwrap();
        (
            TrajectoryEnsemble::from_flow(v1, ens, w, part, FlowMethod::AnalyticOracle).unwrap(),
            TrajectoryEnsemble::from_flow(v2, ens, w, part, FlowMethod::AnalyticOracle).unwrap(),
        )
    }

    fn spec(part: Vec<f64>, delta: f64) -> StabilitySpec<f64> {
        StabilitySpec {
            partition: part,
            delta,
            exponents: Exponents::new(4.0, 4.0, 2.0).unwrap(),
            coupling: Coupling::Identity,
            grids: grids(),
        }
    }

    #[test]
    fn equal_fields_give_zero() {
        let (v1, _) = lift_and_shifted(0.0);
        let ens = sample_reference_measure(&Source::standard_gaussian(3), 300, 5, None).unwrap();
        let part = vec![0.0, 0.5, 1.0];
        let (e1, e2) = ensembles(&v1, &v1, &ens, &part);
        let r = stability_bound_audit(&e1, &e2, &v1, &v1, &spec(part, 0.1)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.difference_term, 0.0);
    }

    #[test]
    fn constant_perturbation_grows_logarithmically() {
        let c = 0.3;
        let (v1, v2) = lift_and_shifted(c);
        let ens = sample_reference_measure(&Source::standard_gaussian(3), 300, 5, None).unwrap();
        let part: Vec<f64> = (0..=4).map(|k| k as f64 * 0.25).collect();
        let (e1, e2) = ensembles(&v1, &v2, &ens, &part);
        let delta = 0.01;
        let r = stability_bound_audit(&e1, &e2, &v1, &v2, &spec(part, delta)).unwrap();
        let expected = (c * 1.0 / delta).ln_1p();
        assert!((r.lhs - expected).abs() < 1e-9, "{} vs {expected}", r.lhs);
        assert!(r.ratio <= 1.0, "{r:?}");
    }

    #[test]
    fn ratio_stable_under_refinement() {
        let (v1, v2) = lift_and_shifted(0.2);
        let ens = sample_reference_measure(&Source::standard_gaussian(3), 300, 5, None).unwrap();
        let coarse: Vec<f64> = (0..=2).map(|k| k as f64 * 0.5).collect();
        let fine: Vec<f64> = (0..=8).map(|k| k as f64 * 0.125).collect();
        let (a1, a2) = ensembles(&v1, &v2, &ens, &fine);
        let rc = stability_bound_audit(&a1, &a2, &v1, &v2, &spec(coarse, 0.05)).unwrap();
        let rf = stability_bound_audit(&a1, &a2, &v1, &v2, &spec(fine, 0.05)).unwrap();
        let q = rf.ratio / rc.ratio;
        assert!(q > 0.5 && q < 2.0, "{rc:?} {rf:?}");
    }

    #[test]
    fn mismatched_windows() {
        let (v1, v2) = lift_and_shifted(0.2);
        let ens = sample_reference_measure(&Source::standard_gaussian(3), 20, 5, None).unwrap();
        let (a1, _) = ensembles(&v1, &v2, &ens, &[0.0, 1.0]);
        let (_, b2) = ensembles(&v1, &v2, &ens, &[0.0, 2.0]);
        let r = stability_bound_audit(&a1, &b2, &v1, &v2, &spec(vec![0.0, 1.0], 0.1));
        assert!(matches!(r, Err(Error::WindowMismatch(_))));
        let coupled = StabilitySpec {
            coupling: Coupling::Pairs(vec![(0, 25)]),
            ..spec(vec![0.0, 1.0], 0.1)
        };
        let (_, a2) = ensembles(&v1, &v2, &ens, &[0.0, 1.0]);
        assert!(stability_bound_audit(&a1, &a2, &v1, &v2, &coupled).is_err());
    }
}
