//! Adaptive Simpson quadrature.

use crate::{Error, Result, Scalar};

const MAX_DEPTH: u32 = 48;

/// Integral of `f` over `[a, b]` (either orientation) to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / T::lit(2.0);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut failed = false;
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut failed);
    if failed || !v.is_finite() {
        return Err(Error::QuadratureFailure {
            tol: tol.to_f64_lossy(),
            estimate: v.to_f64_lossy(),
        });
    }
    Ok(v)
}

fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Scalar>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
    failed: &mut bool,
) -> T {
    let m = (a + b) / T::lit(2.0);
    let lm = (a + m) / T::lit(2.0);
    let rm = (m + b) / T::lit(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // stop when Richardson error is in tolerance, or the interval no longer splits
    if delta.abs() <= T::lit(15.0) * tol || m == a || m == b {
        return left + right + delta / T::lit(15.0);
    }
    if depth == 0 {
        *failed = true;
        return left + right + delta / T::lit(15.0);
    }
    let half = tol / T::lit(2.0);
    recurse(f, a, m, fa, flm, fm, left, half, depth - 1, failed)
        + recurse(f, m, b, fm, frm, fb, right, half, depth - 1, failed)
}

/// Composite Simpson on `n` (rounded up to even) panels of uniformly sampled values.
pub fn simpson_uniform<T: Scalar>(values: &[T], step: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    if n == 2 {
        return step * (values[0] + values[1]) / T::lit(2.0);
    }
    // odd number of points -> pure Simpson; even -> Simpson plus a trapezoid tail
    let (simpson_end, tail) = if n % 2 == 1 {
        (n, T::zero())
    } else {
        (n - 1, step * (values[n - 2] + values[n - 1]) / T::lit(2.0))
    };
    let mut acc = values[0] + values[simpson_end - 1];
    for (i, &v) in values.iter().enumerate().take(simpson_end - 1).skip(1) {
        acc += if i % 2 == 1 {
            T::lit(4.0) * v
        } else {
            T::lit(2.0) * v
        };
    }
    acc * step / T::lit(3.0) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_cos() {
        let v = adaptive_simpson(|x: f64| x.cos(), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 1f64.sin()).abs() < 1e-12);
        let w = adaptive_simpson(|x: f64| x.cos(), 1.0, 0.0, 1e-13).unwrap();
        assert!((w + 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        // int_{-1}^{1} 1/(x^2 + 1e-4) dx = 2 * 100 * atan(100)
        let v = adaptive_simpson(|x: f64| 1.0 / (x * x + 1e-4), -1.0, 1.0, 1e-10).unwrap();
        let exact = 200.0 * 100f64.atan();
        assert!((v - exact).abs() < 1e-7, "{v} vs {exact}");
    }

    #[test]
    fn non_integrable_fails() {
        let r = adaptive_simpson(
            |x: f64| 1.0 / x.abs().sqrt().max(1e-300).powi(4),
            -1.0,
            1.0,
            1e-10,
        );
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn uniform_simpson_is_exact_for_cubics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson_uniform(&vals, h) - 0.25).abs() < 1e-14);
    }
}
