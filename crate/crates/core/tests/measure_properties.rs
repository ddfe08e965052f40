use flowlab::field::catalog;
use flowlab::flow::FlowMethod;
use flowlab::measure::{
    pushforward_density, sample_reference_measure, Grid, MaximalEngine, RadiusNet, ScalarGridField,
    Source,
};
use proptest::prelude::*;

fn wave(a: f64, b: f64, k: f64) -> ScalarGridField<f64> {
    ScalarGridField::from_fn(Grid::cube(2, -1.0, 1.0, 20).unwrap(), move |x| {
        a * (k * x[0]).sin() + b * (x[0] * x[1]).cos() + (x[1] - 0.3).abs()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sharp_is_at_most_twice_star(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0.5f64..8.0, r in 0.05f64..2.0) {
        let g = wave(a, b, k);
        let e = MaximalEngine::new(&g, RadiusNet::for_grid(&g.grid));
        let star = e.star_grid();
        let sharp = e.sharp_grid(r);
        for (s, m) in sharp.values.iter().zip(&star.values) {
            prop_assert!(*s <= 2.0 * m, "{s} > 2 * {m}");
        }
    }

    #[test]
    fn sharp_is_monotone_in_radius(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0.5f64..8.0, r in 0.05f64..1.0, f in 1.0f64..3.0) {
        let g = wave(a, b, k);
        let e = MaximalEngine::new(&g, RadiusNet::for_grid(&g.grid));
        let small = e.sharp_grid(r);
        let large = e.sharp_grid(r * f);
        prop_assert!(small.values.iter().zip(&large.values).all(|(x, y)| x <= y));
    }

    #[test]
    fn pushforward_conserves_mass(seed in any::<u64>(), t in 0.0f64..2.0) {
        let ens = sample_reference_measure(&Source::standard_gaussian(2), 400, seed, None).unwrap();
        let saddle = catalog::builtin_fields::<f64>()
            .into_iter()
            .find(|f| f.name() == "saddle")
            .unwrap();
        let grid = Grid::cube(2, -3.0, 3.0, 16).unwrap();
        let pd = pushforward_density(&ens, &saddle, t, FlowMethod::Numeric(1e-8), &grid).unwrap();
        let total = pd.mass_in_grid + pd.mass_outside + pd.mass_lost;
        prop_assert!((total - ens.total_mass()).abs() <= 1e-12);
        prop_assert!((pd.density.integral() - pd.mass_in_grid).abs() <= 1e-12);
        prop_assert_eq!(pd.failed, 0);
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), n in 1usize..300) {
        let src = Source::uniform_box(vec![-1.0, -1.0, -1.0], vec![1.0, 1.0, 1.0]);
        let set = catalog::helix_singular_set::<f64>().with_exclusion(0.05);
        let a = sample_reference_measure(&src, n, seed, Some(&set)).unwrap();
        let b = sample_reference_measure(&src, n, seed, Some(&set)).unwrap();
        prop_assert_eq!(&a.coords, &b.coords);
        prop_assert_eq!(&a.weights, &b.weights);
        prop_assert!(a.weights.iter().all(|&w| w >= 0.0));
        prop_assert_eq!(a.coords.len(), a.weights.len() * 3);
    }
}
