//! The A, B, R residuals of the composite map `X_{s,t} = F2_t o F1_s` and
//! log-log slope estimation over a ladder of `delta = s' - s`.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::field::{eval_field, jacobian, DiffMethod, FieldPair, VectorField};
use crate::flow::FlowMethod;
use crate::linalg;
use crate::measure::ParticleEnsemble;
use crate::quad::simpson_uniform;
use crate::{Error, Result, Scalar};

use super::defect::leg;
use super::report::{ResidualKind, ResidualReport};

/// `X_{s,t}(x) = F2_t(F1_s(x))`.
pub fn composite_map<T: Scalar>(
    pair: &FieldPair<T>,
    x: &[T],
    s: T,
    t: T,
    method: FlowMethod<T>,
) -> Result<Vec<T>> {
    let a = leg(&pair.first, x, s, method, "F1_s(x)")?;
    Ok(leg(&pair.second, &a.point, t, method, "F2_t(F1_s(x))")?.point)
}

/// `(X_{s,t}(x_i), X_{s',t}(x_i))` for every ensemble point. The first failure
/// in index order is returned.
fn paired_maps<T: Scalar>(
    pair: &FieldPair<T>,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    t: T,
    method: FlowMethod<T>,
) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    if ens.dim != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: pair.dim(),
            got: ens.dim,
        });
    }
    let out: Vec<Result<(Vec<T>, Vec<T>)>> = (0..ens.len())
        .into_par_iter()
        .map(|i| {
            let x = ens.point(i);
            let a = composite_map(pair, x, s, t, method)?;
            let b = if s2 == s {
                a.clone()
            } else {
                composite_map(pair, x, s2, t, method)?
            };
            Ok((a, b))
        })
        .collect();
    out.into_iter().collect()
}

/// `(sum_i w_i v_i^p)^(1/p)`; `p = inf` gives the max.
pub fn weighted_norm<T: Scalar>(weights: &[T], values: &[T], p: T) -> T {
    if p.is_infinite() {
        return values.iter().copied().fold(T::zero(), T::max);
    }
    let s: T = weights
        .iter()
        .zip(values)
        .map(|(&w, &v)| w * v.powf(p))
        .sum();
    s.powf(T::one() / p)
}

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "norm exponent must be >= 1, got {p}"
        )));
    }
    Ok(())
}

fn base_report<T: Scalar>(
    kind: ResidualKind,
    value: T,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    t: T,
) -> ResidualReport<T> {
    ResidualReport::new(kind, value, ens.len(), ens.seed)
        .with("s", s)
        .with("s_prime", s2)
        .with("t", t)
        .with("delta", s2 - s)
}

/// `||X_{s',t} - X_{s,t}||_{L^p(ens)}`.
pub fn residual_a<T: Scalar>(
    pair: &FieldPair<T>,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    t: T,
    p: T,
    method: FlowMethod<T>,
) -> Result<ResidualReport<T>> {
    check_p(p)?;
    let maps = paired_maps(pair, ens, s, s2, t, method)?;
    let mags: Vec<T> = maps.iter().map(|(a, b)| linalg::dist(a, b)).collect();
    let value = weighted_norm(&ens.weights, &mags, p);
    Ok(base_report(ResidualKind::A, value, ens, s, s2, t).with("p", p))
}

/// `||X_{s',t} - X_{s,t} - (s' - s) V1(X_{s,t})||_{L^1(ens)}`.
pub fn residual_b<T: Scalar>(
    pair: &FieldPair<T>,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    t: T,
    method: FlowMethod<T>,
) -> Result<ResidualReport<T>> {
    let maps = paired_maps(pair, ens, s, s2, t, method)?;
    let delta = s2 - s;
    let mags: Vec<Result<T>> = maps
        .par_iter()
        .map(|(a, b)| {
            let v = eval_field(&pair.first, a, T::zero())?;
            let mut r = linalg::sub(b, a);
            linalg::axpy(-delta, &v, &mut r);
            Ok(linalg::norm(&r))
        })
        .collect();
    let mags = mags.into_iter().collect::<Result<Vec<T>>>()?;
    let value = weighted_norm(&ens.weights, &mags, T::one());
    Ok(base_report(ResidualKind::B, value, ens, s, s2, t))
}

fn diff_method<T: Scalar>(field: &VectorField<T>) -> DiffMethod<T> {
    if field.has_analytic_jacobian() {
        DiffMethod::Analytic
    } else {
        DiffMethod::central()
    }
}

fn r_norm<T: Scalar>(
    pair: &FieldPair<T>,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    t: T,
    method: FlowMethod<T>,
) -> Result<T> {
    let maps = paired_maps(pair, ens, s, s2, t, method)?;
    let dm = diff_method(&pair.second);
    let mags: Vec<Result<T>> = maps
        .par_iter()
        .map(|(a, b)| {
            let va = eval_field(&pair.second, a, T::zero())?;
            let vb = eval_field(&pair.second, b, T::zero())?;
            let dv = jacobian(&pair.second, a, T::zero(), dm)?;
            let lin = dv.mul_vec(&linalg::sub(b, a));
            let r: Vec<T> = vb
                .iter()
                .zip(&va)
                .zip(&lin)
                .map(|((&p, &q), &l)| p - q - l)
                .collect();
            Ok(linalg::norm(&r))
        })
        .collect();
    let mags = mags.into_iter().collect::<Result<Vec<T>>>()?;
    Ok(weighted_norm(&ens.weights, &mags, T::one()))
}

/// `||V2(X_{s',t}) - V2(X_{s,t}) - DV2(X_{s,t})(X_{s',t} - X_{s,t})||_{L^1(ens)}`.
pub fn residual_r<T: Scalar>(
    pair: &FieldPair<T>,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    t: T,
    method: FlowMethod<T>,
) -> Result<ResidualReport<T>> {
    let value = r_norm(pair, ens, s, s2, t, method)?;
    Ok(base_report(ResidualKind::R, value, ens, s, s2, t))
}

/// `(1/|s' - s|) int_{-T}^{T} ||R_{s,s';tau}||_{L^1} dtau` by composite Simpson
/// on `steps` (even) intervals. Zero when `s' = s`.
pub fn residual_r_integrated<T: Scalar>(
    pair: &FieldPair<T>,
    ens: &ParticleEnsemble<T>,
    s: T,
    s2: T,
    horizon: T,
    steps: usize,
    method: FlowMethod<T>,
) -> Result<ResidualReport<T>> {
    if steps == 0 || !steps.is_multiple_of(2) || !(horizon > T::zero()) {
        return Err(Error::InvalidArgument(
            "need an even number of steps and a positive horizon".into(),
        ));
    }
    let delta = s2 - s;
    let value = if delta == T::zero() {
        T::zero()
    } else {
        let h = T::lit(2.0) * horizon / T::from_count(steps);
        let mut vals = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let tau = -horizon + h * T::from_count(k);
            vals.push(r_norm(pair, ens, s, s2, tau, method)?);
        }
        simpson_uniform(&vals, h) / delta.abs()
    };
    Ok(
        ResidualReport::new(ResidualKind::R, value, ens.len(), ens.seed)
            .with("s", s)
            .with("s_prime", s2)
            .with("horizon", horizon)
            .with("delta", delta)
            .with("integrated", T::one()),
    )
}

/// Least-squares fit of `log(value)` against `log(delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
    /// 95% Student-t interval for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

pub fn scaling_exponent<T: Scalar>(deltas: &[T], values: &[T]) -> Result<SlopeFit> {
    if deltas.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: deltas.len(),
            got: values.len(),
        });
    }
    let n = deltas.len();
    if n < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {n}"
        )));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for (&d, &v) in deltas.iter().zip(values) {
        let (d, v) = (d.to_f64_lossy().abs(), v.to_f64_lossy());
        if !(d > 0.0 && v > 0.0 && d.is_finite() && v.is_finite()) {
            return Err(Error::DegenerateFit(format!(
                "log-log fit needs positive finite data, got delta={d}, value={v}"
            )));
        }
        xs.push(d.ln());
        ys.push(v.ln());
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let decades = (hi - lo) / std::f64::consts::LN_10;
    if decades < 2.0 - 1e-9 {
        return Err(Error::DegenerateFit(format!(
            "deltas span {decades:.3} decades, need 2"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let dof = nf - 2.0;
    let std_err = (sse / dof / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        std_err,
        ci_low: slope - tq * std_err,
        ci_high: slope + tq * std_err,
        points: n,
    })
}

/// Slope over reports carrying a `delta` parameter.
pub fn scaling_exponent_of<T: Scalar>(reports: &[ResidualReport<T>]) -> Result<SlopeFit> {
    let deltas = reports
        .iter()
        .map(|r| {
            r.param("delta")
                .ok_or_else(|| Error::DegenerateFit("report without a delta parameter".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let values: Vec<f64> = reports.iter().map(|r| r.value.to_f64_lossy()).collect();
    scaling_exponent(&deltas, &values)
}

/// `delta = 2^-k` for `k` in `lo..=hi`.
pub fn dyadic_ladder<T: Scalar>(lo: i32, hi: i32) -> Vec<T> {
    (lo..=hi).map(|k| T::lit(2.0).powi(-k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::catalog;
    use crate::measure::{sample_reference_measure, Source};

    fn ens(n: usize) -> ParticleEnsemble<f64> {
        sample_reference_measure(&Source::standard_gaussian(3), n, 21, None).unwrap()
    }

    #[test]
    fn exact_power_laws() {
        let d: Vec<f64> = dyadic_ladder(3, 10);
        let f1 = scaling_exponent(&d, &d).unwrap();
        assert!((f1.slope - 1.0).abs() < 1e-12 && f1.std_err < 1e-12);
        let sq: Vec<f64> = d.iter().map(|x| 3.0 * x * x).collect();
        assert!((scaling_exponent(&d, &sq).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        let short = [1.0, 0.5, 0.25];
        assert!(matches!(
            scaling_exponent(&short, &short),
            Err(Error::DegenerateFit(_))
        ));
        let narrow: Vec<f64> = dyadic_ladder(1, 4);
        assert!(matches!(
            scaling_exponent(&narrow, &narrow),
            Err(Error::DegenerateFit(_))
        ));
        let d: Vec<f64> = dyadic_ladder(3, 10);
        let mut z = d.clone();
        z[2] = 0.0;
        assert!(matches!(
            scaling_exponent(&d, &z),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn equal_times_give_zero() {
        let pair = catalog::commuting_linear_pair::<f64>();
        let e = ens(200);
        let m = FlowMethod::AnalyticOracle;
        assert_eq!(
            residual_a(&pair, &e, 0.5, 0.5, 1.0, 2.0, m).unwrap().value,
            0.0
        );
        assert_eq!(residual_b(&pair, &e, 0.5, 0.5, 1.0, m).unwrap().value, 0.0);
        assert_eq!(residual_r(&pair, &e, 0.5, 0.5, 1.0, m).unwrap().value, 0.0);
    }

    #[test]
    fn a_halves_and_b_quarters() {
        let pair = catalog::commuting_linear_pair::<f64>();
        let e = ens(2000);
        let m = FlowMethod::AnalyticOracle;
        let a1 = residual_a(&pair, &e, 0.5, 0.5 + 0.02, 0.7, 2.0, m)
            .unwrap()
            .value;
        let a2 = residual_a(&pair, &e, 0.5, 0.5 + 0.01, 0.7, 2.0, m)
            .unwrap()
            .value;
        assert!((a2 / a1 - 0.5).abs() < 0.05, "{}", a2 / a1);
        let b1 = residual_b(&pair, &e, 0.5, 0.5 + 0.02, 0.0, m)
            .unwrap()
            .value;
        let b2 = residual_b(&pair, &e, 0.5, 0.5 + 0.01, 0.0, m)
            .unwrap()
            .value;
        assert!((b2 / b1 - 0.25).abs() < 0.05, "{}", b2 / b1);
    }

    #[test]
    fn linear_second_field_has_no_remainder() {
        let pair = catalog::commuting_linear_pair::<f64>();
        let e = ens(500);
        let r = residual_r(&pair, &e, 0.5, 0.625, 0.3, FlowMethod::AnalyticOracle).unwrap();
        assert!(r.value < 1e-14, "{}", r.value);
    }

    #[test]
    fn smooth_remainder_quarters() {
        let pair = catalog::windowed_swirl_pair::<f64>();
        let e = ens(2000);
        let m = FlowMethod::AnalyticOracle;
        let r1 = residual_r(&pair, &e, 0.5, 0.52, 0.4, m).unwrap().value;
        let r2 = residual_r(&pair, &e, 0.5, 0.51, 0.4, m).unwrap().value;
        assert!((r2 / r1 - 0.25).abs() < 0.05, "{}", r2 / r1);
    }

    #[test]
    fn integrated_remainder_vanishes() {
        let pair = catalog::windowed_swirl_pair::<f64>();
        let e = ens(500);
        let m = FlowMethod::AnalyticOracle;
        let big = residual_r_integrated(&pair, &e, 0.5, 0.6, 1.0, 8, m)
            .unwrap()
            .value;
        let small = residual_r_integrated(&pair, &e, 0.5, 0.51, 1.0, 8, m)
            .unwrap()
            .value;
        assert!(small < big / 5.0, "{small} vs {big}");
    }

    #[test]
    fn helix_b_degrades_across_crossings() {
        let pair = catalog::helix_pair::<f64>();
        let src = Source::uniform_box(vec![-2.0, -2.0, -1.0], vec![-0.2, -0.2, 1.0]);
        let e = sample_reference_measure(&src, 2000, 4, None).unwrap();
        let m = FlowMethod::AnalyticOracle;
        // with t = 3 every y-leg passes y = 0; the rectangle swept by the two
        // flows winds around the z axis for a fraction ~ delta of the points,
        // each contributing a jump of 2 pi
        let deltas: Vec<f64> = dyadic_ladder(0, 7);
        let s = 1.0;
        let vals: Vec<f64> = deltas
            .iter()
            .map(|&d| residual_b(&pair, &e, s, s + d, 3.0, m).unwrap().value)
            .collect();
        let fit = scaling_exponent(&deltas, &vals).unwrap();
        assert!(fit.slope < 1.5, "{fit:?}");
    }
}
