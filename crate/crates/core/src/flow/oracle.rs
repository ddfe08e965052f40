//! Closed-form flows for the builtin fields.

use crate::field::ScalarFn;
use crate::quad::adaptive_simpson;
use crate::{Error, Result, Scalar};

use super::FlowOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelixField {
    /// `d/dx - y/(x^2+y^2) d/dz`
    First,
    /// `d/dy + x/(x^2+y^2) d/dz`
    Second,
}

fn principal_angle<T: Scalar>(x: T, y: T) -> T {
    (y / x).atan()
}

fn check_start<T: Scalar>(x0: &[T]) -> Result<()> {
    if x0.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: x0.len(),
        });
    }
    if x0[0] == T::zero() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::StartOnSingularSet(
            x0.iter().map(|v| v.to_f64_lossy()).collect(),
        ));
    }
    Ok(())
}

/// Exact flow of a helix field for time `t` (any sign).
pub fn analytic_flow_helix<T: Scalar>(which: HelixField, x0: &[T], t: T) -> Result<Vec<T>> {
    analytic_flow_helix_outcome(which, x0, t).map(|o| o.point)
}

/// As [`analytic_flow_helix`], also reporting whether the path met `x = 0`.
pub fn analytic_flow_helix_outcome<T: Scalar>(
    which: HelixField,
    x0: &[T],
    t: T,
) -> Result<FlowOutcome<T>> {
    check_start(x0)?;
    let (x, y, z) = (x0[0], x0[1], x0[2]);
    match which {
        HelixField::First => {
            let xe = x + t;
            let crossed = x * xe < T::zero();
            let ze = if y == T::zero() {
                if x * xe <= T::zero() {
                    return Err(Error::FlowUndefined {
                        leg: "helix V1".into(),
                        reason: "path runs through the z-axis".into(),
                    });
                }
                z
            } else {
                z + (x / y).atan() - (xe / y).atan()
            };
            Ok(FlowOutcome {
                point: vec![xe, y, ze],
                crossed,
            })
        }
        HelixField::Second => {
            let ye = y + t;
            let ze = z + principal_angle(x, ye) - principal_angle(x, y);
            Ok(FlowOutcome::uncrossed(vec![x, ye, ze]))
        }
    }
}

/// The first helix flow written as `f(x+t, y) + C` with `f = atan(y/x)`,
/// the constant shifting by `pi` each time the path crosses `x = 0`.
pub fn helix_v1_branch_form<T: Scalar>(x0: &[T], t: T) -> Result<Vec<T>> {
    check_start(x0)?;
    let (x, y, z) = (x0[0], x0[1], x0[2]);
    let xe = x + t;
    if xe == T::zero() {
        return Err(Error::FlowUndefined {
            leg: "helix V1".into(),
            reason: "end point lies on x = 0".into(),
        });
    }
    let mut c = z - principal_angle(x, y);
    if x * xe < T::zero() {
        c -= T::PI() * crate::scalar::sign0(y) * crate::scalar::sign0(t);
    }
    Ok(vec![xe, y, principal_angle(xe, y) + c])
}

/// Limit of the first helix flow as the path reaches `x = 0` from `x0`.
pub fn helix_v1_crossing_limit<T: Scalar>(x0: &[T]) -> Result<Vec<T>> {
    check_start(x0)?;
    let (x, y, z) = (x0[0], x0[1], x0[2]);
    let s = crate::scalar::sign0;
    Ok(vec![
        T::zero(),
        y,
        z - principal_angle(x, y) + T::FRAC_PI_2() * s(y) * s(x),
    ])
}

/// Flow of `V_which = d/dx_which + (df/dx_which) d/dz` for a function of
/// `(x, y)`, with the vertical displacement computed by quadrature.
pub fn analytic_flow_graph_foliation<T: Scalar>(
    f: &ScalarFn<T>,
    which: usize,
    x0: &[T],
    t: T,
    tol: T,
) -> Result<Vec<T>> {
    if which != 1 && which != 2 {
        return Err(Error::InvalidArgument(format!(
            "graph foliation fields are numbered 1 and 2, got {which}"
        )));
    }
    if x0.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: x0.len(),
        });
    }
    let axis = which - 1;
    let slope = |tau: T| {
        let mut p = [x0[0], x0[1]];
        p[axis] += tau;
        f.gradient(&p)[axis]
    };
    let dz = adaptive_simpson(slope, T::zero(), t, tol)?;
    let mut out = x0.to_vec();
    out[axis] += t;
    out[2] += dz;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn defect_corner_values() {
        let x = [-1.0, -1.0, 0.0];
        let a = analytic_flow_helix(HelixField::First, &x, 2.0).unwrap();
        assert!((a[2] - PI / 2.0).abs() < 1e-14);
        let b = analytic_flow_helix(HelixField::Second, &a, 2.0).unwrap();
        assert!((b[2] - PI).abs() < 1e-14);
    }

    #[test]
    fn crossing_flag() {
        let o = analytic_flow_helix_outcome(HelixField::First, &[-1.0, 1.0, 0.0], 2.0).unwrap();
        assert!(o.crossed);
        let o = analytic_flow_helix_outcome(HelixField::First, &[1.0, 1.0, 0.0], 2.0).unwrap();
        assert!(!o.crossed);
    }

    #[test]
    fn start_on_plane() {
        let r = analytic_flow_helix(HelixField::Second, &[0.0, 1.0, 0.0], 1.0);
        assert!(matches!(r, Err(Error::StartOnSingularSet(_))));
    }

    #[test]
    fn axis_passage_is_undefined() {
        let r = analytic_flow_helix(HelixField::First, &[-1.0, 0.0, 0.0], 2.0);
        assert!(matches!(r, Err(Error::FlowUndefined { .. })));
        let ok = analytic_flow_helix(HelixField::First, &[1.0, 0.0, 3.0], 2.0).unwrap();
        assert_eq!(ok, vec![3.0, 0.0, 3.0]);
    }

    #[test]
    fn crossing_limit_matches_flow() {
        for &(x, y) in &[(-1.0f64, 2.0), (1.0, 2.0), (-1.0, -0.5), (2.0, -1.0)] {
            let x0 = [x, y, 0.3];
            let lim = helix_v1_crossing_limit(&x0).unwrap();
            let near = analytic_flow_helix(HelixField::First, &x0, -x * (1.0 - 1e-12)).unwrap();
            assert!((near[2] - lim[2]).abs() < 1e-9, "{x},{y}");
        }
    }

    #[test]
    fn graph_foliation_quadrature_matches_difference() {
        let f = ScalarFn::<f64>::sin_cos();
        let x0 = [0.3, -0.7, 1.0];
        for which in [1, 2] {
            let p = analytic_flow_graph_foliation(&f, which, &x0, 1.7, 1e-13).unwrap();
            let exact = 1.0 + f.value(&p[..2]) - f.value(&x0[..2]);
            assert!((p[2] - exact).abs() < 1e-11);
        }
        assert!(analytic_flow_graph_foliation(&f, 3, &x0, 1.0, 1e-10).is_err());
    }

    proptest! {
        #[test]
        fn branch_form_agrees(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -1.0f64..1.0, t in -5.0f64..5.0) {
            prop_assume!(x.abs() > 1e-3 && y.abs() > 1e-3 && (x + t).abs() > 1e-3);
            let a = analytic_flow_helix(HelixField::First, &[x, y, z], t).unwrap();
            let b = helix_v1_branch_form(&[x, y, z], t).unwrap();
            prop_assert!((a[2] - b[2]).abs() < 1e-10);
        }

        #[test]
        fn group_property(x in 0.1f64..3.0, y in -3.0f64..3.0, s in -2.0f64..2.0, t in -2.0f64..2.0) {
            prop_assume!(y.abs() > 1e-2);
            let p = [x, y, 0.0];
            let a = analytic_flow_helix(HelixField::First, &p, s + t).unwrap();
            let m = analytic_flow_helix(HelixField::First, &p, s);
            prop_assume!(m.as_ref().is_ok_and(|m| m[0] != 0.0));
            let b = analytic_flow_helix(HelixField::First, &m.unwrap(), t).unwrap();
            prop_assert!((a[2] - b[2]).abs() < 1e-10);
        }
    }
}
