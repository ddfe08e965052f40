//! Vector fields on R^d: evaluation, Jacobians, divergence and Lie brackets.
//!
//! A [`VectorField`] is an immutable bundle of pure closures. Fields that are
//! only defined almost everywhere carry a [`SingularSet`]: a finite union of
//! affine subspaces where evaluation is refused, with an exclusion radius used
//! by samplers to stay away from it.

pub mod catalog;
pub mod expr;
pub mod scalar_fn;

use std::fmt;
use std::sync::Arc;

use crate::flow::FlowOutcome;
use crate::linalg::{self, Matrix};
use crate::{Error, Result, Scalar};

pub use scalar_fn::ScalarFn;

pub type EvalFn<T> = Arc<dyn Fn(&[T], T) -> Vec<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(&[T], T) -> Matrix<T> + Send + Sync>;
pub type DivergenceFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
/// Closed-form flow `(x0, duration) -> F_duration(x0)`, starting at time 0.
pub type OracleFn<T> = Arc<dyn Fn(&[T], T) -> Result<FlowOutcome<T>> + Send + Sync>;

/// Default exclusion radius around singular sets used by samplers.
pub const DEFAULT_EXCLUSION: f64 = 1e-3;
/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// One affine piece of a singular set.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularComponent<T> {
    /// `{x : normal . x = offset}` with a unit normal.
    Hyperplane { normal: Vec<T>, offset: T },
    /// `{point + s * direction}` with a unit direction.
    Line { point: Vec<T>, direction: Vec<T> },
}

impl<T: Scalar> SingularComponent<T> {
    pub fn hyperplane(normal: Vec<T>, offset: T) -> Self {
        let n = linalg::norm(&normal);
        Self::Hyperplane {
            normal: linalg::scale(T::one() / n, &normal),
            offset: offset / n,
        }
    }

    pub fn line(point: Vec<T>, direction: Vec<T>) -> Self {
        let n = linalg::norm(&direction);
        Self::Line {
            point,
            direction: linalg::scale(T::one() / n, &direction),
        }
    }

    /// Coordinate hyperplane `{x_axis = value}`.
    pub fn coordinate_plane(dim: usize, axis: usize, value: T) -> Self {
        let mut normal = vec![T::zero(); dim];
        normal[axis] = T::one();
        Self::Hyperplane {
            normal,
            offset: value,
        }
    }

    pub fn distance(&self, x: &[T]) -> T {
        match self {
            Self::Hyperplane { .. } => self.signed_distance(x).unwrap_or(T::zero()).abs(),
            Self::Line { point, direction } => {
                let rel = linalg::sub(x, point);
                let along = linalg::dot(&rel, direction);
                let mut perp = rel;
                linalg::axpy(-along, direction, &mut perp);
                linalg::norm(&perp)
            }
        }
    }

    /// Signed distance for hyperplanes, `None` for lower-dimensional pieces.
    pub fn signed_distance(&self, x: &[T]) -> Option<T> {
        match self {
            Self::Hyperplane { normal, offset } => Some(linalg::dot(normal, x) - *offset),
            Self::Line { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Hyperplane { normal, .. } => normal.len(),
            Self::Line { point, .. } => point.len(),
        }
    }
}

/// Finite union of affine subspaces plus the sampler exclusion radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSet<T> {
    pub components: Vec<SingularComponent<T>>,
    pub exclusion: T,
}

impl<T: Scalar> Default for SingularSet<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Scalar> SingularSet<T> {
    pub fn empty() -> Self {
        Self {
            components: Vec::new(),
            exclusion: T::lit(DEFAULT_EXCLUSION),
        }
    }

    pub fn new(components: Vec<SingularComponent<T>>) -> Self {
        Self {
            components,
            exclusion: T::lit(DEFAULT_EXCLUSION),
        }
    }

    pub fn with_exclusion(mut self, eps: T) -> Self {
        self.exclusion = eps;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Distance to the nearest component (`+inf` when empty).
    pub fn distance(&self, x: &[T]) -> T {
        self.components
            .iter()
            .map(|c| c.distance(x))
            .fold(T::infinity(), T::min)
    }

    /// Distance to the nearest component of codimension >= 2.
    pub fn thin_distance(&self, x: &[T]) -> Option<T> {
        self.components
            .iter()
            .filter(|c| matches!(c, SingularComponent::Line { .. }))
            .map(|c| c.distance(x))
            .reduce(T::min)
    }

    /// Machine-precision membership used by evaluation.
    pub fn contains(&self, x: &[T]) -> bool {
        if self.is_empty() {
            return false;
        }
        let scale = T::one() + linalg::max_abs(x);
        self.distance(x) <= T::lit(16.0) * T::epsilon() * scale
    }

    /// Sampler membership in the exclusion tube.
    pub fn excludes(&self, x: &[T]) -> bool {
        !self.is_empty() && self.distance(x) < self.exclusion
    }

    /// Signed distances to every hyperplane component, in declaration order.
    pub fn plane_values(&self, x: &[T]) -> Vec<T> {
        self.components
            .iter()
            .filter_map(|c| c.signed_distance(x))
            .collect()
    }

    pub fn plane_normals(&self) -> Vec<&[T]> {
        self.components
            .iter()
            .filter_map(|c| match c {
                SingularComponent::Hyperplane { normal, .. } => Some(normal.as_slice()),
                SingularComponent::Line { .. } => None,
            })
            .collect()
    }
}

/// How derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffMethod<T> {
    Analytic,
    CentralDifference(T),
}

impl<T: Scalar> DiffMethod<T> {
    pub fn central() -> Self {
        Self::CentralDifference(T::lit(DEFAULT_FD_STEP))
    }
}

/// A named vector field with optional analytic derivative data.
#[derive(Clone)]
pub struct VectorField<T> {
    name: String,
    dim: usize,
    eval: EvalFn<T>,
    jacobian: Option<JacobianFn<T>>,
    divergence: Option<DivergenceFn<T>>,
    oracle: Option<OracleFn<T>>,
    singular: SingularSet<T>,
    time_dependent: bool,
}

impl<T: fmt::Debug> fmt::Debug for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic_divergence", &self.divergence.is_some())
            .field("flow_oracle", &self.oracle.is_some())
            .field("singular", &self.singular)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl<T: Scalar> VectorField<T> {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[T], T) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        assert!(dim > 0, "vector field dimension must be positive");
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            jacobian: None,
            divergence: None,
            oracle: None,
            singular: SingularSet::empty(),
            time_dependent: false,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[T], T) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_divergence(mut self, div: impl Fn(&[T], T) -> T + Send + Sync + 'static) -> Self {
        self.divergence = Some(Arc::new(div));
        self
    }

    pub fn with_oracle(
        mut self,
        oracle: impl Fn(&[T], T) -> Result<FlowOutcome<T>> + Send + Sync + 'static,
    ) -> Self {
        self.oracle = Some(Arc::new(oracle));
        self
    }

    pub fn with_singular_set(mut self, singular: SingularSet<T>) -> Self {
        self.singular = singular;
        self
    }

    pub fn time_dependent(mut self, yes: bool) -> Self {
        self.time_dependent = yes;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn singular_set(&self) -> &SingularSet<T> {
        &self.singular
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn oracle(&self) -> Option<&OracleFn<T>> {
        self.oracle.as_ref()
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if self.singular.contains(x) || x.iter().any(|v| !v.is_finite()) {
            return Err(self.singular_error(x));
        }
        Ok(())
    }

    fn singular_error(&self, x: &[T]) -> Error {
        Error::SingularPoint {
            field: self.name.clone(),
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }
}

/// Evaluates `field` at `(x, t)`.
pub fn eval_field<T: Scalar>(field: &VectorField<T>, x: &[T], t: T) -> Result<Vec<T>> {
    field.check_point(x)?;
    let v = (field.eval)(x, t);
    if v.len() != field.dim {
        return Err(Error::DimensionMismatch {
            expected: field.dim,
            got: v.len(),
        });
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(field.singular_error(x));
    }
    Ok(v)
}

/// Jacobian matrix with entry `(i, j) = dV_i / dx_j`.
pub fn jacobian<T: Scalar>(
    field: &VectorField<T>,
    x: &[T],
    t: T,
    method: DiffMethod<T>,
) -> Result<Matrix<T>> {
    field.check_point(x)?;
    match method {
        DiffMethod::Analytic => {
            let jac = field
                .jacobian
                .as_ref()
                .ok_or_else(|| Error::NoAnalyticJacobian(field.name.clone()))?;
            Ok(jac(x, t))
        }
        DiffMethod::CentralDifference(h) => central_difference_jacobian(field, x, t, h),
    }
}

fn central_difference_jacobian<T: Scalar>(
    field: &VectorField<T>,
    x: &[T],
    t: T,
    h: T,
) -> Result<Matrix<T>> {
    let d = field.dim;
    // keep the stencil strictly off the singular set
    let clearance = field.singular.distance(x);
    let h = if clearance.is_finite() {
        h.min(clearance / T::lit(2.0))
    } else {
        h
    };
    if h <= T::zero() {
        return Err(field.singular_error(x));
    }
    let mut jac = Matrix::zeros(d, d);
    let mut probe = x.to_vec();
    for j in 0..d {
        probe[j] = x[j] + h;
        let plus = eval_field(field, &probe, t)?;
        probe[j] = x[j] - h;
        let minus = eval_field(field, &probe, t)?;
        probe[j] = x[j];
        let inv = T::one() / (T::lit(2.0) * h);
        for i in 0..d {
            jac[(i, j)] = (plus[i] - minus[i]) * inv;
        }
    }
    Ok(jac)
}

/// Trace of the Jacobian; uses the analytic divergence when available.
pub fn divergence<T: Scalar>(
    field: &VectorField<T>,
    x: &[T],
    t: T,
    method: DiffMethod<T>,
) -> Result<T> {
    if let (DiffMethod::Analytic, Some(div)) = (method, field.divergence.as_ref()) {
        field.check_point(x)?;
        return Ok(div(x, t));
    }
    Ok(jacobian(field, x, t, method)?.trace())
}

/// An ordered pair of fields sharing a dimension.
#[derive(Debug, Clone)]
pub struct FieldPair<T> {
    pub name: String,
    pub first: VectorField<T>,
    pub second: VectorField<T>,
    /// Catalog metadata: the bracket vanishes off the singular sets.
    pub bracket_vanishes_ae: bool,
}

impl<T: Scalar> FieldPair<T> {
    pub fn new(
        name: impl Into<String>,
        first: VectorField<T>,
        second: VectorField<T>,
        bracket_vanishes_ae: bool,
    ) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: second.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            first,
            second,
            bracket_vanishes_ae,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn swapped(&self) -> Self {
        Self {
            name: format!("{}(swapped)", self.name),
            first: self.second.clone(),
            second: self.first.clone(),
            bracket_vanishes_ae: self.bracket_vanishes_ae,
        }
    }

    /// True when `x` is inside the exclusion tube of either field.
    pub fn excludes(&self, x: &[T]) -> bool {
        self.first.singular_set().excludes(x) || self.second.singular_set().excludes(x)
    }
}

/// `[V1, V2](x) = DV2(x) V1(x) - DV1(x) V2(x)`.
pub fn lie_bracket<T: Scalar>(
    pair: &FieldPair<T>,
    x: &[T],
    t: T,
    method: DiffMethod<T>,
) -> Result<Vec<T>> {
    let v1 = eval_field(&pair.first, x, t)?;
    let v2 = eval_field(&pair.second, x, t)?;
    let dv1 = jacobian(&pair.first, x, t, method)?;
    let dv2 = jacobian(&pair.second, x, t, method)?;
    Ok(linalg::sub(&dv2.mul_vec(&v1), &dv1.mul_vec(&v2)))
}
