use std::fmt;
use std::sync::Arc;

use crate::linalg::Matrix;
use crate::Scalar;

type ValueFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type GradFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
type HessFn<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;

/// Scalar function on R^d with an analytic gradient and optional Hessian.
#[derive(Clone)]
pub struct ScalarFn<T> {
    pub name: String,
    pub dim: usize,
    value: ValueFn<T>,
    gradient: GradFn<T>,
    hessian: Option<HessFn<T>>,
}

impl<T> fmt::Debug for ScalarFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl<T: Scalar> ScalarFn<T> {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
        }
    }

    pub fn with_hessian(mut self, h: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[T]) -> Option<Matrix<T>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// `f = 0`.
    pub fn zero(dim: usize) -> Self {
        Self::new("0", dim, |_| T::zero(), move |_| vec![T::zero(); dim])
            .with_hessian(move |_| Matrix::zeros(dim, dim))
    }

    /// `f(x, y) = sin(x) cos(y)` on R^2.
    pub fn sin_cos() -> Self {
        Self::new(
            "sin x cos y",
            2,
            |x| x[0].sin() * x[1].cos(),
            |x| vec![x[0].cos() * x[1].cos(), -x[0].sin() * x[1].sin()],
        )
        .with_hessian(|x| {
            let (sx, cx) = x[0].sin_cos();
            let (sy, cy) = x[1].sin_cos();
            Matrix::from_rows(&[&[-sx * cy, -cx * sy], &[-cx * sy, -sx * cy]])
        })
    }

    /// `f(x) = c . x + b`.
    pub fn linear(coeffs: Vec<T>, intercept: T) -> Self {
        let dim = coeffs.len();
        let c = coeffs.clone();
        Self::new(
            "linear",
            dim,
            move |x| x.iter().zip(&c).map(|(&a, &b)| a * b).sum::<T>() + intercept,
            move |_| coeffs.clone(),
        )
        .with_hessian(move |_| Matrix::zeros(dim, dim))
    }

    /// `f(x) = 1/2 x^T Q x + c . x` for symmetric `Q`.
    pub fn quadratic(q: Matrix<T>, c: Vec<T>) -> Self {
        let dim = c.len();
        let (q1, q2, q3) = (q.clone(), q.clone(), q);
        let (c1, c2) = (c.clone(), c);
        Self::new(
            "quadratic",
            dim,
            move |x| {
                let qx = q1.mul_vec(x);
                T::lit(0.5) * crate::linalg::dot(x, &qx) + crate::linalg::dot(&c1, x)
            },
            move |x| crate::linalg::add(&q2.mul_vec(x), &c2),
        )
        .with_hessian(move |_| q3.clone())
    }

    /// Smooth compactly supported bump `exp(1 - 1/(1 - |x|^2/R^2))` inside the
    /// ball of radius `R`, zero outside.
    pub fn bump(dim: usize, radius: T) -> Self {
        let r2 = radius * radius;
        let value = move |x: &[T]| {
            let s = crate::linalg::dot(x, x) / r2;
            if s >= T::one() {
                T::zero()
            } else {
                (T::one() - T::one() / (T::one() - s)).exp()
            }
        };
        let grad = move |x: &[T]| {
            let s = crate::linalg::dot(x, x) / r2;
            if s >= T::one() {
                return vec![T::zero(); x.len()];
            }
            let u = T::one() - s;
            let b = (T::one() - T::one() / u).exp();
            // d/dx_i = b * (-1/u^2) * 2 x_i / R^2
            let k = -b * T::lit(2.0) / (u * u * r2);
            x.iter().map(|&xi| k * xi).collect()
        };
        let hess = move |x: &[T]| {
            let d = x.len();
            let s = crate::linalg::dot(x, x) / r2;
            if s >= T::one() {
                return Matrix::zeros(d, d);
            }
            let u = T::one() - s;
            let b = (T::one() - T::one() / u).exp();
            let two = T::lit(2.0);
            // g_i = phi(s) x_i with phi = -2 b / (u^2 R^2); ds/dx_j = 2 x_j / R^2
            // dphi/ds = -2/R^2 * (b' u^2 - b * d(u^2)/ds) / u^4, b' = -b/u^2, d(u^2)/ds = -2u
            let phi = -two * b / (u * u * r2);
            let dphi_ds = -two / r2 * (-b + two * b * u) / (u * u * u * u);
            Matrix::from_fn(d, d, |i, j| {
                let delta = if i == j { phi } else { T::zero() };
                delta + dphi_ds * two * x[j] / r2 * x[i]
            })
        };
        Self::new("bump", dim, value, grad).with_hessian(hess)
    }

    /// Centred Gaussian `exp(-|x|^2 / (2 sigma^2))`.
    pub fn gaussian(dim: usize, sigma: T) -> Self {
        let s2 = sigma * sigma;
        Self::new(
            "gaussian",
            dim,
            move |x| (-crate::linalg::dot(x, x) / (T::lit(2.0) * s2)).exp(),
            move |x| {
                let g = (-crate::linalg::dot(x, x) / (T::lit(2.0) * s2)).exp();
                x.iter().map(|&xi| -g * xi / s2).collect()
            },
        )
        .with_hessian(move |x| {
            let d = x.len();
            let g = (-crate::linalg::dot(x, x) / (T::lit(2.0) * s2)).exp();
            Matrix::from_fn(d, d, |i, j| {
                let delta = if i == j { T::one() } else { T::zero() };
                g * (x[i] * x[j] / (s2 * s2) - delta / s2)
            })
        })
    }
}
