use flowlab::field::{catalog, divergence, jacobian, lie_bracket, DiffMethod};
use proptest::prelude::*;

fn point(dim: usize, c: [f64; 3]) -> Vec<f64> {
    c[..dim].to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bracket_is_antisymmetric(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, t in 0.0f64..1.0) {
        for pair in catalog::builtin_catalog::<f64>() {
            let x = point(pair.dim(), [a, b, c]);
            if pair.first.singular_set().distance(&x) < 0.05 || pair.second.singular_set().distance(&x) < 0.05 {
                continue;
            }
            let method = if pair.first.has_analytic_jacobian() && pair.second.has_analytic_jacobian() {
                DiffMethod::Analytic
            } else {
                DiffMethod::central()
            };
            let fwd = lie_bracket(&pair, &x, t, method).unwrap();
            let rev = lie_bracket(&pair.swapped(), &x, t, method).unwrap();
            for (u, v) in fwd.iter().zip(&rev) {
                prop_assert!((u + v).abs() <= 1e-12 * (1.0 + u.abs()), "{}: {fwd:?} {rev:?}", pair.name);
            }
        }
    }

    #[test]
    fn helix_fields_are_divergence_free(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        prop_assume!(a.abs() > 0.05);
        let pair = catalog::helix_pair::<f64>();
        for f in [&pair.first, &pair.second] {
            let d = divergence(f, &[a, b, c], 0.0, DiffMethod::Analytic).unwrap();
            prop_assert!(d.abs() <= 1e-9, "{} {d}", f.name());
        }
    }

    #[test]
    fn analytic_jacobians_match_differences(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, t in 0.0f64..1.0) {
        for f in catalog::builtin_fields::<f64>() {
            if !f.has_analytic_jacobian() {
                continue;
            }
            let x = point(f.dim(), [a, b, c]);
            if f.singular_set().distance(&x) < 0.2 {
                continue;
            }
            let an = jacobian(&f, &x, t, DiffMethod::Analytic).unwrap();
            let fd = jacobian(&f, &x, t, DiffMethod::CentralDifference(1e-5)).unwrap();
            let scale = an.frobenius().max(1.0);
            prop_assert!(an.max_abs_diff(&fd) <= 1e-5 * scale, "{} at {x:?}", f.name());
        }
    }
}

#[test]
fn every_catalog_field_has_an_analytic_jacobian() {
    for f in catalog::builtin_fields::<f64>() {
        assert!(f.has_analytic_jacobian(), "{}", f.name());
    }
}
