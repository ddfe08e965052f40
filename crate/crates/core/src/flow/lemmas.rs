//! Escape times and the chain rule along trajectories.

use crate::field::{eval_field, ScalarFn, VectorField};
use crate::linalg;
use crate::{Error, Result, Scalar};

use super::Trajectory;

/// Safe time for paths started in the ball of radius `inner` to stay inside
/// radius `outer`, given `sup_speed = sup |V|` on the larger ball.
///
/// Returns `0.9 * min((outer - inner) / sup_speed, horizon)`.
pub fn escape_time_bound<T: Scalar>(inner: T, outer: T, sup_speed: T, horizon: T) -> Result<T> {
    if !(inner > T::zero() && inner < outer) || !outer.is_finite() {
        return Err(Error::InvalidRadii {
            inner: inner.to_f64_lossy(),
            outer: outer.to_f64_lossy(),
        });
    }
    if !(sup_speed >= T::zero()) || !(horizon > T::zero()) {
        return Err(Error::InvalidArgument(
            "speed bound must be nonnegative and horizon positive".into(),
        ));
    }
    let travel = if sup_speed == T::zero() {
        T::infinity()
    } else {
        (outer - inner) / sup_speed
    };
    Ok(T::lit(0.9) * travel.min(horizon))
}

/// Largest `|V(x, t)|` over a lattice of `per_axis^d` points filling the ball
/// `|x - center| <= radius`. Points on the singular set are skipped.
pub fn sup_norm_on_ball<T: Scalar>(
    field: &VectorField<T>,
    center: &[T],
    radius: T,
    t: T,
    per_axis: usize,
) -> Result<T> {
    let d = field.dim();
    if center.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: center.len(),
        });
    }
    if per_axis < 2 || !(radius > T::zero()) {
        return Err(Error::InvalidArgument(
            "need a positive radius and at least 2 points per axis".into(),
        ));
    }
    let total = per_axis.pow(d as u32);
    let step = T::lit(2.0) * radius / T::from_count(per_axis - 1);
    let mut best = T::zero();
    let mut idx = vec![0usize; d];
    let mut x = vec![T::zero(); d];
    for _ in 0..total {
        for k in 0..d {
            x[k] = center[k] - radius + step * T::from_count(idx[k]);
        }
        if linalg::dist(&x, center) <= radius {
            if let Ok(v) = eval_field(field, &x, t) {
                best = best.max(linalg::norm(&v));
            }
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(best)
}

/// Chain-rule check `d/dt f(theta_t) = grad f(theta_t) . V(theta_t, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRuleResidual<T> {
    /// Largest `|(f(b) - f(a))/h - trapezoid of grad f . V|` over intervals.
    pub max: T,
    pub mean: T,
    pub intervals: usize,
    /// Intervals left out because they straddle a plane crossing.
    pub skipped: usize,
}

pub fn chain_rule_residual<T: Scalar>(
    f: &ScalarFn<T>,
    field: &VectorField<T>,
    trajectory: &Trajectory<T>,
) -> Result<ChainRuleResidual<T>> {
    if f.dim != field.dim() || trajectory.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: f.dim,
        });
    }
    let rate = |x: &[T], t: T| -> Option<T> {
        eval_field(field, x, t)
            .ok()
            .map(|v| linalg::dot(&f.gradient(x), &v))
    };
    let (mut max, mut sum) = (T::zero(), T::zero());
    let (mut used, mut skipped) = (0usize, 0usize);
    for k in 1..trajectory.len() {
        let (ta, tb) = (trajectory.times[k - 1], trajectory.times[k]);
        let h = tb - ta;
        if h == T::zero() {
            continue;
        }
        let straddles = trajectory.crossings.iter().any(|c| {
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            let (clo, chi) = if c.time < c.restart_time {
                (c.time, c.restart_time)
            } else {
                (c.restart_time, c.time)
            };
            chi > lo && clo < hi || c.time == ta && c.restart_time == tb
        });
        let (xa, xb) = (&trajectory.states[k - 1], &trajectory.states[k]);
        let (Some(ra), Some(rb)) = (rate(xa, ta), rate(xb, tb)) else {
            skipped += 1;
            continue;
        };
        if straddles {
            skipped += 1;
            continue;
        }
        let quotient = (f.value(xb) - f.value(xa)) / h;
        let r = (quotient - (ra + rb) / T::lit(2.0)).abs();
        max = max.max(r);
        sum += r;
        used += 1;
    }
    let mean = if used == 0 {
        T::zero()
    } else {
        sum / T::from_count(used)
    };
    Ok(ChainRuleResidual {
        max,
        mean,
        intervals: used,
        skipped,
    })
}
