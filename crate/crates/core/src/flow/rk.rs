//! Dormand-Prince 5(4) with PI step control and hyperplane event handling.

use crate::field::{eval_field, SingularComponent, VectorField};
use crate::linalg;
use crate::{Error, Result, Scalar};

use super::{Crossing, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    /// Mixed absolute/relative local error tolerance.
    pub tol: T,
    /// Step cap as a fraction of the distance to thin singular components.
    pub step_cap_factor: T,
    pub blowup_norm: T,
    pub max_steps: usize,
    /// Bisection tolerance on crossing times.
    pub event_tol: T,
    /// Normal offset used to restart on the far side of a plane.
    pub push_through: T,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn with_tolerance(tol: T) -> Self {
        Self {
            tol,
            step_cap_factor: T::lit(0.25),
            blowup_norm: T::lit(1e6),
            max_steps: 2_000_000,
            event_tol: T::lit(1e-12),
            push_through: T::lit(1e-12),
        }
    }
}

/// What the integrator keeps besides the final state.
#[derive(Debug, Clone, PartialEq)]
pub enum Recording<T> {
    FinalOnly,
    EveryStep,
    /// States exactly at these times (sorted in the direction of integration).
    At(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run<T> {
    pub final_state: Vec<T>,
    pub final_time: T,
    pub crossings: Vec<Crossing<T>>,
    pub trajectory: Option<Trajectory<T>>,
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step<T> {
    y: Vec<T>,
    f_end: Vec<T>,
    err: T,
}

fn dp_step<T: Scalar>(
    field: &VectorField<T>,
    t: T,
    y: &[T],
    k1: &[T],
    h: T,
    tol: T,
) -> Result<Step<T>> {
    let d = y.len();
    let mut k: Vec<Vec<T>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut stage = vec![T::zero(); d];
    for s in 1..7 {
        stage.copy_from_slice(y);
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                linalg::axpy(h * T::lit(a), kj, &mut stage);
            }
        }
        k.push(eval_field(field, &stage, t + T::lit(C[s]) * h)?);
    }
    // the last stage point is the 5th-order solution
    let mut err = T::zero();
    for i in 0..d {
        let mut e = T::zero();
        for (s, ks) in k.iter().enumerate() {
            if E[s] != 0.0 {
                e += T::lit(E[s]) * ks[i];
            }
        }
        let sc = tol * (T::one() + y[i].abs().max(stage[i].abs()));
        err = err.max((h * e).abs() / sc);
    }
    let f_end = k.pop().expect("seven stages");
    Ok(Step {
        y: stage,
        f_end,
        err,
    })
}

fn hermite<T: Scalar>(y0: &[T], y1: &[T], f0: &[T], f1: &[T], h: T, theta: T) -> Vec<T> {
    let one = T::one();
    let two = T::lit(2.0);
    (0..y0.len())
        .map(|i| {
            let dy = y1[i] - y0[i];
            (one - theta) * y0[i]
                + theta * y1[i]
                + theta
                    * (theta - one)
                    * ((one - two * theta) * dy + (theta - one) * h * f0[i] + theta * h * f1[i])
        })
        .collect()
}

fn initial_step<T: Scalar>(
    field: &VectorField<T>,
    t0: T,
    y0: &[T],
    f0: &[T],
    dir: T,
    span: T,
    tol: T,
) -> T {
    let scaled = |v: &[T]| {
        v.iter()
            .zip(y0)
            .map(|(&a, &y)| (a / (tol * (T::one() + y.abs()))).abs())
            .fold(T::zero(), T::max)
    };
    let d0 = scaled(y0);
    let d1 = scaled(f0);
    let tiny = T::lit(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<T> = y0.iter().zip(f0).map(|(&y, &f)| y + dir * h0 * f).collect();
    let d2 = match eval_field(field, &y1, t0 + dir * h0) {
        Ok(f1) => {
            let diff: Vec<T> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
            scaled(&diff) / h0
        }
        Err(_) => return h0,
    };
    let m = d1.max(d2);
    let h1 = if m <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / m).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(span)
}

/// Integrates `field` from `(t0, x0)` to `t1` (either direction).
///
/// When the path meets a hyperplane of the singular set the crossing time is
/// located by bisection on the dense output, the state there is computed by a
/// direct step, and integration resumes a small normal offset past the plane.
pub fn integrate<T: Scalar>(
    field: &VectorField<T>,
    x0: &[T],
    t0: T,
    t1: T,
    cfg: &IntegratorConfig<T>,
    recording: Recording<T>,
) -> Result<Run<T>> {
    if x0.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    if !(cfg.tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(
            "integration times must be finite".into(),
        ));
    }
    let singular = field.singular_set();
    if singular.contains(x0) {
        return Err(Error::StartOnSingularSet(
            x0.iter().map(|v| v.to_f64_lossy()).collect(),
        ));
    }
    let planes: Vec<&SingularComponent<T>> = singular
        .components
        .iter()
        .filter(|c| matches!(c, SingularComponent::Hyperplane { .. }))
        .collect();
    let normals = singular.plane_normals();

    let dir = if t1 >= t0 { T::one() } else { -T::one() };
    let ahead = |from: T, to: T| (to - from) * dir;

    let mut traj = match &recording {
        Recording::FinalOnly => None,
        _ => Some(Trajectory {
            field_name: field.name().to_string(),
            times: vec![t0],
            states: vec![x0.to_vec()],
            crossings: Vec::new(),
            tolerance_used: cfg.tol,
        }),
    };
    let samples: Vec<T> = match &recording {
        Recording::At(s) => s
            .iter()
            .copied()
            .filter(|&s| ahead(t0, s) > T::zero())
            .collect(),
        _ => Vec::new(),
    };
    let every_step = matches!(recording, Recording::EveryStep);
    let mut next_sample = 0usize;

    let mut t = t0;
    let mut y = x0.to_vec();
    let mut crossings = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    if t0 == t1 {
        if let Some(tr) = traj.as_mut() {
            for &s in &samples {
                tr.times.push(s);
                tr.states.push(y.clone());
            }
        }
        return Ok(Run {
            final_state: y,
            final_time: t,
            crossings,
            trajectory: traj,
            accepted,
            rejected,
        });
    }

    let mut k1 = eval_field(field, &y, t)?;
    let mut h = initial_step(field, t, &y, &k1, dir, ahead(t0, t1), cfg.tol);
    let mut facold = T::lit(1e-4);
    let mut last_rejected = false;
    let beta = T::lit(0.04);
    let expo1 = T::lit(0.2) - beta * T::lit(0.75);
    let safe = T::lit(0.9);

    loop {
        let remaining = ahead(t, t1);
        if remaining <= T::zero() {
            break;
        }
        if accepted + rejected >= cfg.max_steps {
            return Err(Error::StiffnessFailure {
                time: t.to_f64_lossy(),
                step: h.to_f64_lossy(),
            });
        }
        let mut habs = h.abs();
        if let Some(dl) = singular.thin_distance(&y) {
            habs = habs.min(cfg.step_cap_factor * dl);
        }
        let mut target = None;
        if habs >= remaining {
            habs = remaining;
            target = Some(t1);
        }
        if let Some(&s) = samples.get(next_sample) {
            let to_s = ahead(t, s);
            if habs >= to_s {
                habs = to_s;
                target = Some(s);
            }
        }
        let floor = T::lit(16.0) * T::epsilon() * (T::one() + t.abs());
        if habs < floor && target.is_none() {
            return Err(Error::StiffnessFailure {
                time: t.to_f64_lossy(),
                step: habs.to_f64_lossy(),
            });
        }
        let hs = dir * habs;
        let step = match dp_step(field, t, &y, &k1, hs, cfg.tol) {
            Ok(s) if s.err.is_finite() => s,
            Ok(_) => {
                rejected += 1;
                last_rejected = true;
                h = hs / T::lit(2.0);
                if h.abs() < floor {
                    return Err(Error::StiffnessFailure {
                        time: t.to_f64_lossy(),
                        step: h.to_f64_lossy(),
                    });
                }
                continue;
            }
            Err(e @ Error::SingularPoint { .. }) => {
                rejected += 1;
                last_rejected = true;
                h = hs / T::lit(2.0);
                if h.abs() < floor {
                    // the path runs into the singular set without crossing it
                    return Err(e);
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let err = step.err;
        let fac11 = err.powf(expo1);
        if err > T::one() {
            rejected += 1;
            last_rejected = true;
            h = hs / (T::lit(5.0)).min(fac11 / safe);
            continue;
        }
        accepted += 1;
        let t_new = target.unwrap_or(t + hs);
        let norm = linalg::max_abs(&step.y);
        if norm > cfg.blowup_norm {
            return Err(Error::BlowUp {
                time: t_new.to_f64_lossy(),
                norm: norm.to_f64_lossy(),
            });
        }

        let mut fac = fac11 / facold.powf(beta);
        fac = T::lit(0.1).max((T::lit(5.0)).min(fac / safe));
        let mut h_next = hs / fac;
        if last_rejected {
            h_next = dir * h_next.abs().min(habs);
        }
        facold = err.max(T::lit(1e-4));
        last_rejected = false;

        if let Some(cross) =
            detect_crossing(field, &planes, &normals, cfg, dir, t, &y, &k1, &step, hs)?
        {
            let Crossing {
                restart_time: tq,
                restart: ref q,
                time: te,
                point: ref p,
                ..
            } = cross;
            if let Some(tr) = traj.as_mut() {
                if every_step {
                    tr.times.push(te);
                    tr.states.push(p.clone());
                    tr.times.push(tq);
                    tr.states.push(q.clone());
                }
                while let Some(&s) = samples.get(next_sample) {
                    if ahead(tq, s) > T::zero() {
                        break;
                    }
                    let src = if ahead(te, s) >= T::zero() { q } else { p };
                    tr.times.push(s);
                    tr.states.push(src.clone());
                    next_sample += 1;
                }
                tr.crossings.push(cross.clone());
            }
            y = q.clone();
            crossings.push(cross);
            if ahead(tq, t1) <= T::zero() {
                t = t1;
                break;
            }
            t = tq;
            k1 = eval_field(field, &y, t)?;
            h = dir * h_next.abs().min(habs);
            continue;
        }

        t = t_new;
        y = step.y;
        k1 = step.f_end;
        h = h_next;
        if let Some(tr) = traj.as_mut() {
            let at_sample = samples.get(next_sample).is_some_and(|&s| s == t_new);
            if at_sample {
                next_sample += 1;
            }
            if every_step || at_sample {
                tr.times.push(t);
                tr.states.push(y.clone());
            }
        }
    }

    if let Some(tr) = traj.as_mut() {
        while let Some(&s) = samples.get(next_sample) {
            tr.times.push(s);
            tr.states.push(y.clone());
            next_sample += 1;
        }
    }
    Ok(Run {
        final_state: y,
        final_time: t,
        crossings,
        trajectory: traj,
        accepted,
        rejected,
    })
}

#[allow(clippy::too_many_arguments)]
fn detect_crossing<T: Scalar>(
    field: &VectorField<T>,
    planes: &[&SingularComponent<T>],
    normals: &[&[T]],
    cfg: &IntegratorConfig<T>,
    dir: T,
    t: T,
    y: &[T],
    k1: &[T],
    step: &Step<T>,
    hs: T,
) -> Result<Option<Crossing<T>>> {
    if planes.is_empty() {
        return Ok(None);
    }
    let g = |c: &SingularComponent<T>, x: &[T]| c.signed_distance(x).expect("hyperplane");
    // earliest sign change among the planes
    let mut best: Option<(usize, T)> = None;
    for (i, plane) in planes.iter().enumerate() {
        let g0 = g(plane, y);
        let g1 = g(plane, &step.y);
        if g0 == T::zero() || g0 * g1 >= T::zero() {
            continue;
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        let theta_tol = cfg.event_tol / hs.abs();
        while hi - lo > theta_tol {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let ym = hermite(y, &step.y, k1, &step.f_end, hs, mid);
            if g(plane, &ym) * g0 > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = (lo + hi) / T::lit(2.0);
        if best.is_none_or(|(_, b)| theta < b) {
            best = Some((i, theta));
        }
    }
    let Some((i, theta)) = best else {
        return Ok(None);
    };
    let plane = planes[i];
    let te = t + theta * hs;
    let he = te - t;
    let interp = || hermite(y, &step.y, k1, &step.f_end, hs, theta);
    let p = if he.abs() <= T::epsilon() * (T::one() + t.abs()) {
        y.to_vec()
    } else {
        match dp_step(field, t, y, k1, he, cfg.tol) {
            Ok(s) => s.y,
            Err(_) => interp(),
        }
    };
    let v = eval_field(field, &p, te).unwrap_or_else(|_| k1.to_vec());
    let far = crate::scalar::sign0(g(plane, &step.y));
    let vn = linalg::dot(normals[i], &v) * dir * far;
    if !(vn > T::zero()) {
        // grazing contact; the step is kept as is
        return Ok(None);
    }
    let offset = cfg
        .push_through
        .max(T::lit(64.0) * T::epsilon() * (T::one() + linalg::max_abs(&p)));
    let needed = offset - far * g(plane, &p);
    let tau = if needed > T::zero() {
        needed / vn
    } else {
        T::zero()
    };
    let q: Vec<T> = p.iter().zip(&v).map(|(&a, &b)| a + dir * tau * b).collect();
    Ok(Some(Crossing {
        time: te,
        point: p,
        plane: i,
        restart_time: te + dir * tau,
        restart: q,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::catalog;
    use crate::flow::oracle::{analytic_flow_helix, HelixField};

    #[test]
    fn exponential_growth() {
        let f = VectorField::new("exp", 1, |x: &[f64], _| vec![x[0]]);
        let cfg = IntegratorConfig::with_tolerance(1e-10);
        let run = integrate(&f, &[1.0], 0.0, 2.0, &cfg, Recording::FinalOnly).unwrap();
        assert!((run.final_state[0] - 2f64.exp()).abs() < 1e-8);
        let back = integrate(&f, &[1.0], 0.0, -2.0, &cfg, Recording::FinalOnly).unwrap();
        assert!((back.final_state[0] - (-2f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = VectorField::new("riccati", 1, |x: &[f64], _| vec![x[0] * x[0]]);
        let cfg = IntegratorConfig::with_tolerance(1e-8);
        let r = integrate(&f, &[1.0], 0.0, 2.0, &cfg, Recording::FinalOnly);
        assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
    }

    #[test]
    fn helix_crossing_is_recorded() {
        let v1 = catalog::helix_v1::<f64>();
        let x0 = [-1.0, 1.0, 0.0];
        let cfg = IntegratorConfig::with_tolerance(1e-10);
        let run = integrate(&v1, &x0, 0.0, 2.0, &cfg, Recording::EveryStep).unwrap();
        assert_eq!(run.crossings.len(), 1);
        let c = &run.crossings[0];
        assert!((c.time - 1.0).abs() < 1e-9, "{}", c.time);
        assert!(c.point[0].abs() < 1e-9);
        let exact = analytic_flow_helix(HelixField::First, &x0, 2.0).unwrap();
        assert!(linalg::dist(&run.final_state, &exact) < 1e-7);
        let tr = run.trajectory.unwrap();
        assert_eq!(tr.crossing_flags().iter().filter(|&&b| b).count(), 1);
    }

    #[test]
    fn sampled_recording_hits_requested_times() {
        let f = VectorField::new("rot", 2, |x: &[f64], _| vec![-x[1], x[0]]);
        let cfg = IntegratorConfig::with_tolerance(1e-10);
        let times = vec![0.0, 0.5, 1.0, 1.5];
        let run = integrate(
            &f,
            &[1.0, 0.0],
            0.0,
            1.5,
            &cfg,
            Recording::At(times.clone()),
        )
        .unwrap();
        let tr = run.trajectory.unwrap();
        assert_eq!(tr.times, times);
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn start_on_plane_is_rejected() {
        let v1 = catalog::helix_v1::<f64>();
        let cfg = IntegratorConfig::with_tolerance(1e-8);
        let r = integrate(&v1, &[0.0, 1.0, 0.0], 0.0, 1.0, &cfg, Recording::FinalOnly);
        assert!(matches!(r, Err(Error::StartOnSingularSet(_))));
    }
}
