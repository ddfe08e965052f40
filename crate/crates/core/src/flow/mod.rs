//! Trajectories and flow maps.
//!
//! Numeric flows come from an embedded Runge-Kutta 5(4) pair ([`rk`]) that
//! detects and steps through hyperplane crossings of a field's singular set.
//! Closed-form flows for the builtin fields live in [`oracle`].

pub mod lemmas;
pub mod oracle;
pub mod rk;

use std::fmt::Write as _;

use crate::field::VectorField;
use crate::{Error, Result, Scalar};

pub use lemmas::{chain_rule_residual, escape_time_bound, sup_norm_on_ball};
pub use oracle::{analytic_flow_graph_foliation, analytic_flow_helix, HelixField};
pub use rk::{integrate, IntegratorConfig, Recording};

/// End point of a flow evaluation, plus whether the path met a singular plane.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome<T> {
    pub point: Vec<T>,
    pub crossed: bool,
}

impl<T> FlowOutcome<T> {
    pub fn uncrossed(point: Vec<T>) -> Self {
        Self {
            point,
            crossed: false,
        }
    }
}

/// Closed time interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> TimeWindow<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time window needs finite a < b, got [{a}, {b}]"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.a && t <= self.b
    }

    pub fn len(&self) -> T {
        self.b - self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowMethod<T> {
    /// Adaptive integration at the given tolerance.
    Numeric(T),
    /// The field's closed-form flow.
    AnalyticOracle,
}

/// Request for `F_duration(start)`.
#[derive(Debug, Clone)]
pub struct FlowQuery<'a, T> {
    pub field: &'a VectorField<T>,
    pub start: Vec<T>,
    pub duration: T,
    pub method: FlowMethod<T>,
}

impl<T: Scalar> FlowQuery<'_, T> {
    pub fn run(&self) -> Result<FlowOutcome<T>> {
        flow_map(self.field, &self.start, self.duration, self.method)
    }
}

/// `F_duration(x)`, flowing from time 0. Negative durations flow backwards.
pub fn flow_map<T: Scalar>(
    field: &VectorField<T>,
    x: &[T],
    duration: T,
    method: FlowMethod<T>,
) -> Result<FlowOutcome<T>> {
    if !duration.is_finite() {
        return Err(Error::InvalidArgument(
            "flow duration must be finite".into(),
        ));
    }
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x.len(),
        });
    }
    match method {
        FlowMethod::AnalyticOracle => {
            let oracle = field
                .oracle()
                .ok_or_else(|| Error::NoFlowOracle(field.name().to_string()))?;
            oracle(x, duration)
        }
        FlowMethod::Numeric(tol) => {
            if duration == T::zero() {
                return Ok(FlowOutcome::uncrossed(x.to_vec()));
            }
            let cfg = IntegratorConfig::with_tolerance(tol);
            let run = integrate(field, x, T::zero(), duration, &cfg, Recording::FinalOnly)?;
            Ok(FlowOutcome {
                crossed: !run.crossings.is_empty(),
                point: run.final_state,
            })
        }
    }
}

/// Where a path met a singular hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing<T> {
    /// Event time, located by bisection.
    pub time: T,
    /// State at the event time, approached from the near side.
    pub point: Vec<T>,
    /// Index of the hyperplane among the singular set's planes.
    pub plane: usize,
    /// Time and state where integration resumed on the far side.
    pub restart_time: T,
    pub restart: Vec<T>,
}

/// Time-stamped solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub field_name: String,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub crossings: Vec<Crossing<T>>,
    pub tolerance_used: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn crossed(&self) -> bool {
        !self.crossings.is_empty()
    }

    pub fn start(&self) -> Option<&[T]> {
        self.states.first().map(Vec::as_slice)
    }

    pub fn end(&self) -> Option<&[T]> {
        self.states.last().map(Vec::as_slice)
    }

    /// Piecewise-linear interpolation between stored samples, clamped to the ends.
    pub fn state_at(&self, t: T) -> Option<Vec<T>> {
        let n = self.times.len();
        if n == 0 {
            return None;
        }
        let increasing = n < 2 || self.times[n - 1] >= self.times[0];
        let key = |s: T| if increasing { s } else { -s };
        let kt = key(t);
        if kt <= key(self.times[0]) {
            return Some(self.states[0].clone());
        }
        if kt >= key(self.times[n - 1]) {
            return Some(self.states[n - 1].clone());
        }
        let hi = self.times.partition_point(|&s| key(s) < kt);
        let lo = hi - 1;
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        Some(
            self.states[lo]
                .iter()
                .zip(&self.states[hi])
                .map(|(&a, &b)| a + w * (b - a))
                .collect(),
        )
    }

    /// Per-row flag: the row is the pre-limit point of a recorded crossing.
    pub fn crossing_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.times.len()];
        for c in &self.crossings {
            if let Some(i) = self.times.iter().position(|&s| s == c.time) {
                flags[i] = true;
            }
        }
        flags
    }

    /// CSV with header `t,x_1,...,x_d,crossing_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim() {
            let _ = write!(out, ",x_{i}");
        }
        out.push_str(",crossing_flag\n");
        for ((t, s), flag) in self
            .times
            .iter()
            .zip(&self.states)
            .zip(self.crossing_flags())
        {
            let _ = write!(out, "{}", t.to_f64_lossy());
            for v in s {
                let _ = write!(out, ",{}", v.to_f64_lossy());
            }
            let _ = writeln!(out, ",{}", u8::from(flag));
        }
        out
    }
}

/// Integrates `field` from `x0` over `window` (starting at `window.a`),
/// recording every accepted step.
pub fn integrate_trajectory<T: Scalar>(
    field: &VectorField<T>,
    x0: &[T],
    window: TimeWindow<T>,
    tol: T,
) -> Result<Trajectory<T>> {
    let cfg = IntegratorConfig::with_tolerance(tol);
    let run = integrate(field, x0, window.a, window.b, &cfg, Recording::EveryStep)?;
    Ok(run.trajectory.expect("every-step recording"))
}

/// Integrates over `window`, recording states exactly at `sample_times`
/// (sorted, inside the window; `window.a` is always the first sample).
pub fn integrate_trajectory_at<T: Scalar>(
    field: &VectorField<T>,
    x0: &[T],
    window: TimeWindow<T>,
    tol: T,
    sample_times: &[T],
) -> Result<Trajectory<T>> {
    if sample_times.windows(2).any(|w| w[1] < w[0])
        || sample_times.iter().any(|&t| !window.contains(t))
    {
        return Err(Error::InvalidArgument(
            "sample times must be sorted and inside the window".into(),
        ));
    }
    let cfg = IntegratorConfig::with_tolerance(tol);
    let run = integrate(
        field,
        x0,
        window.a,
        window.b,
        &cfg,
        Recording::At(sample_times.to_vec()),
    )?;
    Ok(run.trajectory.expect("sampled recording"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_validation() {
        assert!(TimeWindow::new(1.0, 0.0).is_err());
        assert!(TimeWindow::new(0.0, f64::INFINITY).is_err());
        let w = TimeWindow::new(-1.0, 2.0).unwrap();
        assert_eq!(w.len(), 3.0);
    }

    #[test]
    fn state_interpolation() {
        let tr = Trajectory {
            field_name: "f".into(),
            times: vec![0.0, 1.0, 3.0],
            states: vec![vec![0.0], vec![1.0], vec![5.0]],
            crossings: vec![],
            tolerance_used: 1e-8,
        };
        assert_eq!(tr.state_at(2.0).unwrap(), vec![3.0]);
        assert_eq!(tr.state_at(-1.0).unwrap(), vec![0.0]);
        assert_eq!(tr.state_at(9.0).unwrap(), vec![5.0]);
        assert_eq!(tr.to_csv(), "t,x_1,crossing_flag\n0,0,0\n1,1,0\n3,5,0\n");
    }
}
