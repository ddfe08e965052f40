//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use flowlab::commute::{
    commutator_defect, concentration_residual, defect_statistics, dyadic_ladder, pair_singular_set,
    perturbed_field, phi_delta, phi_delta_increment_bound, residual_a, residual_b, residual_r,
    scaling_exponent, scaling_exponent_of, stability_bound_audit, BoundGrids, Coupling,
    DefectStatsSpec, Exponents, StabilitySpec, TrajectoryEnsemble,
};
use flowlab::field::catalog::{self, Registry};
use flowlab::field::{eval_field, lie_bracket, DiffMethod};
use flowlab::flow::{FlowMethod, TimeWindow};
use flowlab::linalg::Matrix;
use flowlab::measure::{
    compressibility_estimate, sample_pairs, sample_reference_measure, sharp_maximal_decay,
    sobolev_pointwise_audit, Grid, MaximalEngine, RadiusNet, ScalarGridField, SobolevGrids,
    SobolevOrder, Source,
};
use flowlab::{Field, Function, Pair};
use flowlab_cli::{run, Experiment, Overrides, RunConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn field(name: &str) -> Field {
    Registry::<f64>::builtin().field(name).unwrap().clone()
}

fn pair(name: &str) -> Pair {
    Registry::<f64>::builtin().pair(name).unwrap().clone()
}

fn helix_box() -> Source<f64> {
    Source::uniform_box(vec![-2.0, -2.0, -1.0], vec![-0.2, -0.2, 1.0])
}

fn quantization() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    pool.install(|| {
        let start = Instant::now();
        let pair = catalog::helix_pair::<f64>();
        let ens =
            sample_reference_measure(&helix_box(), 1000, 11, None).map_err(|e| e.to_string())?;
        let mut worst = [0.0f64; 2];
        for (k, method) in [FlowMethod::AnalyticOracle, FlowMethod::Numeric(1e-8)]
            .into_iter()
            .enumerate()
        {
            for x in ens.points() {
                let d = commutator_defect(&pair, x, 3.0, 3.0, method).map_err(|e| e.to_string())?;
                let err = d.defect[0]
                    .abs()
                    .max(d.defect[1].abs())
                    .max((d.defect[2].abs() - 2.0 * PI).abs());
                worst[k] = worst[k].max(err);
            }
        }
        let secs = start.elapsed().as_secs_f64();
        check(
            worst[0] <= 1e-6 && worst[1] <= 1e-3 && secs <= 30.0,
            format!(
                "oracle err {:.2e}, numeric err {:.2e}, {secs:.1} s single-core",
                worst[0], worst[1]
            ),
        )
    })
}

fn commuting_pairs() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["graph_foliation", "commuting_linear"] {
        let p = pair(name);
        for method in [FlowMethod::AnalyticOracle, FlowMethod::Numeric(1e-8)] {
            let spec = DefectStatsSpec {
                region: Source::uniform_box(vec![-1.0; 3], vec![1.0; 3]),
                s_grid: vec![0.5, 1.0, 2.0],
                t_grid: vec![0.5, 1.0, 2.0],
                samples: 1000,
                seed: 5,
                threshold: 1e-5,
                method,
            };
            let rows = defect_statistics(&p, &spec).map_err(|e| e.to_string())?;
            let max = rows.iter().map(|r| r.max).fold(0.0, f64::max);
            let failed: usize = rows.iter().map(|r| r.failed).sum();
            ok &= max <= 1e-5 && failed == 0;
            let tag = if method == FlowMethod::AnalyticOracle {
                "oracle"
            } else {
                "numeric"
            };
            parts.push(format!("{name}/{tag} max {max:.1e}"));
        }
    }
    check(ok, parts.join(", "))
}

fn bracket_vanishing() -> Outcome {
    let p = catalog::helix_pair::<f64>();
    let set = pair_singular_set(&p).with_exclusion(0.05);
    let ens = sample_reference_measure(&Source::standard_gaussian(3), 10_000, 21, Some(&set))
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in ens.points() {
        let b = lie_bracket(&p, x, 0.0, DiffMethod::Analytic).map_err(|e| e.to_string())?;
        worst = b.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    check(
        worst <= 1e-7,
        format!("max |bracket| {worst:.1e} over 10^4 points"),
    )
}

fn compressibility() -> Outcome {
    let grid = Grid::cube(3, -4.0, 4.0, 32).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["helix.V1", "helix.V2"] {
        let f = field(name);
        let ens = sample_reference_measure(
            &Source::standard_gaussian(3),
            1_000_000,
            31,
            Some(f.singular_set()),
        )
        .map_err(|e| e.to_string())?;
        let rep =
            compressibility_estimate(&f, &ens, &[0.5, 1.0], FlowMethod::AnalyticOracle, &grid)
                .map_err(|e| e.to_string())?;
        let dev = rep
            .density_sup
            .iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max);
        ok &= dev <= rep.tolerance;
        parts.push(format!(
            "{name} ratios {:?} (|r-1| {dev:.3} vs 4-sigma {:.3})",
            rep.density_sup
                .iter()
                .map(|r| (r * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            rep.tolerance
        ));
    }
    check(ok, parts.join("; "))
}

fn residual_slopes() -> Outcome {
    let deltas: Vec<f64> = dyadic_ladder(3, 10);
    let method = FlowMethod::Numeric(1e-10);
    let lin = pair("commuting_linear");
    let ens = sample_reference_measure(&Source::standard_gaussian(3), 10_000, 41, None)
        .map_err(|e| e.to_string())?;
    let s = 0.5;
    let a: Vec<_> = deltas
        .iter()
        .map(|&d| residual_a(&lin, &ens, s, s + d, 0.5, 2.0, method))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let b: Vec<_> = deltas
        .iter()
        .map(|&d| residual_b(&lin, &ens, s, s + d, 0.0, method))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let swirl = pair("windowed_swirl");
    let r: Vec<_> = deltas
        .iter()
        .map(|&d| residual_r(&swirl, &ens, s, s + d, 0.5, method))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let fa = scaling_exponent_of(&a).map_err(|e| e.to_string())?.slope;
    let fb = scaling_exponent_of(&b).map_err(|e| e.to_string())?.slope;
    let fr = scaling_exponent_of(&r).map_err(|e| e.to_string())?.slope;
    check(
        (0.9..=1.1).contains(&fa) && (1.8..=2.2).contains(&fb) && (1.8..=2.2).contains(&fr),
        format!("A {fa:.3} (commuting_linear), B {fb:.3} (commuting_linear, t=0), R {fr:.3} (windowed_swirl)"),
    )
}

fn test_functions() -> Vec<Function> {
    vec![
        Function::bump(2, 0.5),
        Function::gaussian(2, 0.3),
        Function::sin_cos(),
        Function::linear(vec![1.0, -2.0], 0.5),
        Function::quadratic(
            Matrix::from_f64_rows(&[&[2.0, 0.5], &[0.5, 1.0]]),
            vec![0.3, -0.1],
        ),
    ]
}

fn maximal_inequalities() -> Outcome {
    let grid = Grid::cube(2, -1.0, 1.0, 64).unwrap();
    let mut violations = 0usize;
    let mut checked = 0usize;
    for f in test_functions() {
        let g = ScalarGridField::from_fn(grid.clone(), |x| f.value(x)).unwrap();
        let engine = MaximalEngine::new(&g, RadiusNet::for_grid(&g.grid));
        let star = engine.star_grid();
        for r in [0.25, 0.125, 0.0625] {
            let sharp = engine.sharp_grid(r);
            violations += sharp
                .values
                .iter()
                .zip(&star.values)
                .filter(|(s, m)| **s > 2.0 * **m)
                .count();
            checked += sharp.values.len();
        }
    }
    let bump = ScalarGridField::from_fn(grid, |x| Function::bump(2, 0.5).value(x)).unwrap();
    let decay = sharp_maximal_decay(&bump, 2.0, &[0.25, 0.125, 0.0625, 0.03125])
        .map_err(|e| e.to_string())?;
    check(
        violations == 0 && decay.strictly_decreasing,
        format!(
            "{violations} sandwich violations over {checked} cell checks; bump norms {:?}",
            decay
                .norms
                .iter()
                .map(|v| (v * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    )
}

fn sobolev_audits() -> Outcome {
    let g64 = Grid::cube(2, -1.0, 1.0, 64).unwrap();
    let pairs = sample_pairs(&g64, 2000, 51, 0.0625, 0.25, 0.0).map_err(|e| e.to_string())?;
    let audit = |f: &Function, g: &Grid<f64>, o: SobolevOrder| {
        let sg = SobolevGrids::from_fn(f, g).map_err(|e| e.to_string())?;
        sobolev_pointwise_audit(&sg, o, &pairs, None).map_err(|e| e.to_string())
    };
    let fns = test_functions();
    let lin = audit(&fns[3], &g64, SobolevOrder::FirstSharp)?.max_lhs;
    let quad = audit(&fns[4], &g64, SobolevOrder::Second)?.max_lhs;
    let g128 = g64.refined(2);
    let mut worst = 0.0f64;
    let mut consts = Vec::new();
    for o in [
        SobolevOrder::FirstSharp,
        SobolevOrder::FirstStar,
        SobolevOrder::Second,
    ] {
        let c1 = audit(&fns[0], &g64, o)?.max_ratio;
        let c2 = audit(&fns[0], &g128, o)?.max_ratio;
        worst = worst.max((c2 / c1 - 1.0).abs());
        consts.push(format!("{c1:.3}->{c2:.3}"));
    }
    check(
        lin <= 1e-12 && quad <= 1e-12 && worst <= 0.2,
        format!(
            "linear lhs {lin:.1e}, quadratic lhs {quad:.1e}, bump constants {} (max drift {:.1}%)",
            consts.join(" "),
            100.0 * worst
        ),
    )
}

fn concentration() -> Outcome {
    let exps = Exponents::new(4.0, 4.0, 2.0).unwrap();
    let w = TimeWindow::new(0.0, 1.0).unwrap();
    let s = 0.5;
    let deltas: Vec<f64> = dyadic_ladder(3, 10);
    let mut times: Vec<f64> = deltas.iter().map(|d| s + d).collect();
    times.push(s);
    times.sort_by(f64::total_cmp);
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, dim) in [
        ("windowed_swirl.V1", 3),
        ("pulsed_rotation.V1", 3),
        ("rotation2", 2),
    ] {
        let f = field(name);
        let grids = BoundGrids {
            norm_grid: Grid::cube(dim, -8.0, 8.0, if dim == 3 { 32 } else { 64 }).unwrap(),
            density_grid: Grid::cube(dim, -8.0, 8.0, if dim == 3 { 16 } else { 32 }).unwrap(),
            time_intervals: 8,
        };
        let ens = sample_reference_measure(&Source::standard_gaussian(dim), 2000, 61, None)
            .map_err(|e| e.to_string())?;
        let tr = TrajectoryEnsemble::from_flow(&f, &ens, w, &times, FlowMethod::Numeric(1e-10))
            .map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for &d in &deltas {
            let r = concentration_residual(&tr, &f, s, s + d, exps, &grids)
                .map_err(|e| e.to_string())?;
            worst = worst.max(r.lhs / r.omega_bound);
        }
        ok &= worst <= 1.0;
        parts.push(format!("{name} max lhs/omega {worst:.3}"));
    }
    let rot = field("rotation2");
    let grids = BoundGrids {
        norm_grid: Grid::cube(2, -8.0, 8.0, 32).unwrap(),
        density_grid: Grid::cube(2, -8.0, 8.0, 16).unwrap(),
        time_intervals: 8,
    };
    let ens = sample_reference_measure(&Source::standard_gaussian(2), 2000, 62, None)
        .map_err(|e| e.to_string())?;
    let tr = TrajectoryEnsemble::from_curves("straight", &ens, w, &times, |x, t| {
        let v = eval_field(&rot, x, 0.0).unwrap();
        vec![x[0] + t * v[0], x[1] + t * v[1]]
    })
    .map_err(|e| e.to_string())?;
    let lhs: Vec<f64> = deltas
        .iter()
        .map(|&d| concentration_residual(&tr, &rot, s, s + d, exps, &grids).map(|r| r.lhs))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let slope = scaling_exponent(&deltas, &lhs)
        .map_err(|e| e.to_string())?
        .slope;
    ok &= (0.8..=1.2).contains(&slope);
    parts.push(format!("straight-line slope {slope:.3}"));
    check(ok, parts.join(", "))
}

fn phi_algebra() -> Outcome {
    let n = 100_000;
    let xs = sample_reference_measure(&Source::standard_gaussian(3), n, 71, None)
        .map_err(|e| e.to_string())?;
    let ys = sample_reference_measure(
        &Source::Gaussian {
            mean: vec![0.0; 3],
            sigma: 3.0,
        },
        n,
        72,
        None,
    )
    .map_err(|e| e.to_string())?;
    let us = sample_reference_measure(&Source::uniform_box(vec![-8.0], vec![2.0]), n, 73, None)
        .map_err(|e| e.to_string())?;
    let mut violations = 0;
    for i in 0..n {
        let (x, y, delta) = (xs.point(i), ys.point(i), 10f64.powf(us.point(i)[0]));
        let lhs = phi_delta(y, delta).unwrap();
        let rhs = phi_delta_increment_bound(x, y, delta).unwrap();
        if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
            violations += 1;
        }
    }
    let base = field("windowed_swirl.V2");
    let c = 0.3;
    let v2 = perturbed_field(&base, vec![0.0, 0.0, c]);
    let w = TimeWindow::new(0.0, 1.0).unwrap();
    let partition: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
    let ens = sample_reference_measure(&Source::standard_gaussian(3), 500, 74, None)
        .map_err(|e| e.to_string())?;
    let t1 = TrajectoryEnsemble::from_flow(&base, &ens, w, &partition, FlowMethod::Numeric(1e-10))
        .map_err(|e| e.to_string())?;
    let t2 = TrajectoryEnsemble::from_flow(&v2, &ens, w, &partition, FlowMethod::Numeric(1e-10))
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for delta in [0.1, 0.01, 0.001] {
        let spec = StabilitySpec {
            partition: partition.clone(),
            delta,
            exponents: Exponents::new(4.0, 4.0, 2.0).unwrap(),
            coupling: Coupling::Identity,
            grids: BoundGrids {
                norm_grid: Grid::cube(3, -8.0, 8.0, 32).unwrap(),
                density_grid: Grid::cube(3, -8.0, 8.0, 16).unwrap(),
                time_intervals: 8,
            },
        };
        let a = stability_bound_audit(&t1, &t2, &base, &v2, &spec).map_err(|e| e.to_string())?;
        worst = worst.max(a.ratio);
    }
    check(
        violations == 0 && worst <= 1.0,
        format!("{violations} violations over {n} triples; max stability ratio {worst:.4}"),
    )
}

const SMALL_CONFIGS: [(Experiment, &str); 10] = [
    (Experiment::Defect, "pair = helix\nmethod = oracle\nsamples = 200\n[region]\nkind = box\nlo = -2,-2,-1\nhi = -0.2,-0.2,1\n[defect]\ns = 1, 3\nt = 1, 3\n"),
    (Experiment::Ladder, "pair = commuting_linear\nsamples = 300\n[ladder]\nk_min = 3\nk_max = 6\n"),
    (Experiment::Compress, "field = helix.V2\nsamples = 20000\n[grid]\ncells = 16\n"),
    (Experiment::Maximal, "[grid]\ncells = 32\n[maximal]\nlevels = 3\n"),
    (Experiment::Sobolev, "[grid]\ncells = 32\n[sobolev]\npairs = 300\n"),
    (Experiment::Concentrate, "samples = 300\n[concentrate]\ndeltas = 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625\nlevels = 1,2,3\n[bounds]\nnorm_cells = 16\ndensity_cells = 8\n"),
    (Experiment::Stability, "samples = 200\n[stability]\ndelta = 0.1, 0.01\n[bounds]\nnorm_cells = 16\ndensity_cells = 8\n"),
    (Experiment::Catalog, ""),
    (Experiment::Bracket, "samples = 500\n"),
    (Experiment::Trajectory, "[trajectory]\nwindow = 0, 1.5\n"),
];

fn payloads(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            let name = p.file_name()?.to_str()?.to_string();
            (name.ends_with(".csv") || name == "summary.json")
                .then(|| (name, std::fs::read(&p).unwrap()))
        })
        .collect()
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (exp, text) in SMALL_CONFIGS {
        let mut outs = Vec::new();
        for workers in [1usize, 4] {
            let dir = root.path().join(format!("{}-{workers}", exp.name()));
            let cfg = RunConfig::from_text(
                exp,
                text,
                Overrides {
                    seed: Some(17),
                    workers: Some(workers),
                    out: Some(dir.clone()),
                    plots: false,
                },
            )
            .map_err(|e| e.to_string())?;
            run(&cfg).map_err(|e| format!("{}: {e}", exp.name()))?;
            outs.push(payloads(&dir));
        }
        if outs[0] != outs[1] || outs[0].is_empty() {
            return Err(format!("{} differs between 1 and 4 workers", exp.name()));
        }
        files += outs[0].len();
    }
    Ok(format!(
        "{files} payloads byte-identical across 10 experiments"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("counterexample quantization", quantization),
        ("commuting pairs", commuting_pairs),
        ("bracket vanishing", bracket_vanishing),
        ("compressibility", compressibility),
        ("residual scaling", residual_slopes),
        ("maximal inequalities", maximal_inequalities),
        ("pointwise Sobolev audits", sobolev_audits),
        ("concentration criterion", concentration),
        ("phi-delta algebra and stability", phi_algebra),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
