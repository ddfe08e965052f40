use flowlab::commute::{
    commutator_defect, concentration_residual, defect_statistics, dyadic_ladder, omega_variation,
    pair_singular_set, perturbed_field, reports_to_csv, residual_a, residual_b, residual_r,
    residual_r_integrated, scaling_exponent, scaling_exponent_of, stability_bound_audit, Coupling,
    DefectStatsSpec, Exponents, ResidualKind, ResidualReport, SlopeFit, StabilitySpec,
    TrajectoryEnsemble, DEFAULT_DEFECT_THRESHOLD,
};
use flowlab::config::Section;
use flowlab::field::eval_field;
use flowlab::flow::{FlowMethod, TimeWindow};
use serde_json::{json, Value};

use super::{window, Ctx};
use crate::error::CliError;
use crate::output::{jnum, Cell};
use crate::plot::{heat_map, line_chart, Series};
use crate::settings::{list, number, vector, words};

pub fn defect(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let pair = ctx.pair("helix")?;
    let d = pair.dim();
    let method = cfg.method()?;
    let sec = cfg.section("defect");
    let s_grid = list(&sec, "s")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 3.0]);
    let t_grid = list(&sec, "t")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 3.0]);
    let max_failed = number(&sec, "max_failed_fraction")?.unwrap_or(0.01);
    let spec = DefectStatsSpec {
        region: cfg.region(d)?,
        s_grid: s_grid.clone(),
        t_grid: t_grid.clone(),
        samples: cfg.samples(1000)?,
        seed: cfg.seed,
        threshold: number(&sec, "threshold")?.unwrap_or(DEFAULT_DEFECT_THRESHOLD),
        method,
    };
    let rows = defect_statistics(&pair, &spec)?;

    let mut header: Vec<String> = ["s", "t", "fraction_above", "mean", "max"]
        .map(String::from)
        .to_vec();
    header.extend((1..=d).map(|i| format!("mean_abs_{i}")));
    header.extend(["crossed_fraction", "evaluated", "failed"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.out.table(
        "defect.csv",
        &header,
        rows.iter().map(|r| {
            let mut c: Vec<Cell> = vec![
                r.s.into(),
                r.t.into(),
                r.fraction_above.into(),
                r.mean.into(),
                r.max.into(),
            ];
            c.extend(r.mean_abs.iter().map(|&v| Cell::F(v)));
            c.extend([
                r.crossed_fraction.into(),
                r.evaluated.into(),
                r.failed.into(),
            ]);
            c
        }),
    )?;

    if let Some(x) = vector(&sec, "probe", d)? {
        let mut probe = Vec::new();
        for &s in &s_grid {
            for &t in &t_grid {
                let mut c: Vec<Cell> = vec![s.into(), t.into()];
                match commutator_defect(&pair, &x, s, t, method) {
                    Ok(smp) => {
                        for v in [&smp.forward, &smp.reverse, &smp.defect] {
                            c.extend(v.iter().map(|&u| Cell::F(u)));
                        }
                        c.push(smp.crossed.into());
                    }
                    Err(e) => {
                        ctx.notes.push(format!("probe at s={s}, t={t}: {e}"));
                        c.extend(vec![Cell::Empty; 3 * d + 1]);
                    }
                }
                probe.push(c);
            }
        }
        let mut h: Vec<String> = vec!["s".into(), "t".into()];
        for tag in ["forward", "reverse", "defect"] {
            h.extend((1..=d).map(|i| format!("{tag}_{i}")));
        }
        h.push("crossed".into());
        let h: Vec<&str> = h.iter().map(String::as_str).collect();
        ctx.out.table("probe.csv", &h, probe)?;
    }

    if cfg.plots {
        let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
        let svg = heat_map(
            &format!("mean defect, {}", pair.name),
            "s",
            "t",
            &s_grid,
            &t_grid,
            &means,
        )?;
        ctx.out.svg("defect.svg", &svg)?;
    }

    let worst = rows
        .iter()
        .map(|r| {
            let total = r.evaluated + r.failed;
            if total == 0 {
                1.0
            } else {
                r.failed as f64 / total as f64
            }
        })
        .fold(0.0, f64::max);
    if worst > max_failed {
        return Err(CliError::Threshold(format!(
            "{:.3}% of flows failed, above max_failed_fraction = {max_failed}",
            100.0 * worst
        )));
    }
    Ok(json!({
        "pair": pair.name,
        "samples": spec.samples,
        "threshold": spec.threshold,
        "worst_failed_fraction": worst,
        "rows": rows.iter().map(|r| json!({
            "s": r.s, "t": r.t,
            "fraction_above": r.fraction_above,
            "mean": jnum(r.mean), "max": jnum(r.max),
        })).collect::<Vec<_>>(),
    }))
}

fn fit_cells(fit: &Result<SlopeFit, flowlab::Error>) -> (Vec<Cell>, Option<String>) {
    match fit {
        Ok(f) => (
            vec![
                f.slope.into(),
                f.intercept.into(),
                f.std_err.into(),
                f.ci_low.into(),
                f.ci_high.into(),
                f.points.into(),
                Cell::Empty,
            ],
            None,
        ),
        Err(e) => {
            let mut c = vec![Cell::Empty; 6];
            c.push(e.to_string().into());
            (c, Some(e.to_string()))
        }
    }
}

fn fit_json(fit: &Result<SlopeFit, flowlab::Error>) -> Value {
    match fit {
        Ok(f) => json!({
            "slope": jnum(f.slope), "ci_low": jnum(f.ci_low), "ci_high": jnum(f.ci_high),
            "std_err": jnum(f.std_err), "points": f.points,
        }),
        Err(e) => json!({"slope": Value::Null, "note": e.to_string()}),
    }
}

const FIT_COLUMNS: [&str; 7] = [
    "slope",
    "intercept",
    "std_err",
    "ci_low",
    "ci_high",
    "points",
    "note",
];

fn ladder_deltas(sec: &Section) -> Result<Vec<f64>, CliError> {
    if let Some(d) = list(sec, "deltas")? {
        return Ok(d);
    }
    let lo = sec.parse_or("k_min", 3i32)?;
    let hi = sec.parse_or("k_max", 10i32)?;
    if lo > hi {
        return Err(CliError::Config(format!(
            "k_min = {lo} exceeds k_max = {hi}"
        )));
    }
    Ok(dyadic_ladder(lo, hi))
}

pub fn ladder(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let pair = ctx.pair("commuting_linear")?;
    let method = cfg.method()?;
    let n = cfg.samples(10_000)?;
    let ens = ctx.ensemble(&cfg.region(pair.dim())?, n, &pair_singular_set(&pair))?;
    let sec = cfg.section("ladder");
    let kinds = words(&sec, "residuals", "A,B,R")
        .into_iter()
        .map(|w| match w.parse::<ResidualKind>()? {
            k @ (ResidualKind::A | ResidualKind::B | ResidualKind::R) => Ok(k),
            k => Err(CliError::Config(format!(
                "ladder residuals are A, B, R; got `{k}`"
            ))),
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let s = number(&sec, "s")?.unwrap_or(0.5);
    let t_default = number(&sec, "t")?.unwrap_or(0.0);
    let p = number(&sec, "p")?.unwrap_or(2.0);
    let deltas = ladder_deltas(&sec)?;

    let mut all = Vec::new();
    let mut series = Vec::new();
    let mut slope_rows = Vec::new();
    let mut slopes = serde_json::Map::new();
    let mut push_fit = |label: String,
                        t: Option<f64>,
                        reports: &[ResidualReport<f64>],
                        notes: &mut Vec<String>| {
        let fit = scaling_exponent_of(reports);
        let (mut cells, note) = fit_cells(&fit);
        if let Some(msg) = note {
            notes.push(format!("{label}: {msg}"));
        }
        let mut row: Vec<Cell> = vec![label.clone().into(), t.into()];
        row.append(&mut cells);
        slope_rows.push(row);
        slopes.insert(label.clone(), fit_json(&fit));
        series.push(Series::new(
            label,
            reports
                .iter()
                .filter_map(|r| Some((r.param("delta")?, r.value)))
                .collect(),
        ));
    };
    for kind in kinds {
        let key = format!("t_{}", kind.as_str().to_lowercase());
        let t = number(&sec, &key)?.unwrap_or(t_default);
        let reports = deltas
            .iter()
            .map(|&d| match kind {
                ResidualKind::A => residual_a(&pair, &ens, s, s + d, t, p, method),
                ResidualKind::B => residual_b(&pair, &ens, s, s + d, t, method),
                _ => residual_r(&pair, &ens, s, s + d, t, method),
            })
            .collect::<Result<Vec<_>, _>>()?;
        push_fit(kind.as_str().to_string(), Some(t), &reports, &mut ctx.notes);
        all.extend(reports);
    }
    if let Some(horizon) = number(&sec, "integrated_horizon")? {
        let steps = sec.parse_or("integrated_steps", 16usize)?;
        let reports = deltas
            .iter()
            .map(|&d| residual_r_integrated(&pair, &ens, s, s + d, horizon, steps, method))
            .collect::<Result<Vec<_>, _>>()?;
        push_fit("R_integrated".into(), None, &reports, &mut ctx.notes);
        all.extend(reports);
    }

    ctx.out.csv_text("ladder.csv", &reports_to_csv(&all))?;
    let mut header = vec!["kind", "t"];
    header.extend(FIT_COLUMNS);
    ctx.out.table("slopes.csv", &header, slope_rows)?;
    if cfg.plots {
        let svg = line_chart(
            &format!("residual ladder, {}", pair.name),
            "delta",
            "residual",
            &series,
            true,
        )?;
        ctx.out.svg("ladder.svg", &svg)?;
    }
    Ok(json!({"pair": pair.name, "samples": n, "s": s, "p": p, "deltas": deltas, "slopes": slopes}))
}

fn exponents(sec: &Section) -> Result<Exponents<f64>, CliError> {
    Ok(Exponents::new(
        number(sec, "p0")?.unwrap_or(4.0),
        number(sec, "p1")?.unwrap_or(4.0),
        number(sec, "q")?.unwrap_or(2.0),
    )?)
}

fn sorted_times(mut times: Vec<f64>, w: TimeWindow<f64>) -> Result<Vec<f64>, CliError> {
    if let Some(t) = times.iter().find(|&&t| !w.contains(t)) {
        return Err(CliError::Config(format!(
            "time {t} lies outside the window [{}, {}]",
            w.a, w.b
        )));
    }
    times.push(w.a);
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

pub fn concentrate(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let field = ctx.field("windowed_swirl.V1")?;
    let d = field.dim();
    let method = cfg.method()?;
    let n = cfg.samples(2000)?;
    let sec = cfg.section("concentrate");
    let w = window(&sec, (0.0, 1.0))?;
    let s = number(&sec, "s")?.unwrap_or(0.5);
    let deltas = match list(&sec, "deltas")? {
        Some(v) => v,
        None => dyadic_ladder(sec.parse_or("k_min", 3i32)?, sec.parse_or("k_max", 6i32)?),
    };
    let levels: Vec<u32> = match list(&sec, "levels")? {
        Some(v) => v.iter().map(|&l| l as u32).collect(),
        None => Vec::new(),
    };
    let exps = exponents(&sec)?;
    let grids = ctx.bound_grids(d)?;
    let mut times: Vec<f64> = vec![s];
    times.extend(deltas.iter().map(|dl| s + dl));
    for &l in &levels {
        let m = 1u64 << l;
        times.extend((0..=m).map(|k| w.a + (w.b - w.a) * k as f64 / m as f64));
    }
    let times = sorted_times(times, w)?;
    let ens = ctx.ensemble(&cfg.region(d)?, n, field.singular_set())?;
    let curves = sec.get("curves").unwrap_or("flow");
    let tr = match curves {
        "flow" => TrajectoryEnsemble::from_flow(&field, &ens, w, &times, method)?,
        "straight" => TrajectoryEnsemble::from_curves("straight", &ens, w, &times, |x, tau| {
            let v = eval_field(&field, x, w.a).unwrap_or_else(|_| vec![0.0; x.len()]);
            x.iter().zip(&v).map(|(a, b)| a + (tau - w.a) * b).collect()
        })?,
        other => {
            return Err(CliError::Config(format!(
                "unknown curves `{other}` (flow | straight)"
            )))
        }
    };

    let reports = deltas
        .iter()
        .map(|&dl| concentration_residual(&tr, &field, s, s + dl, exps, &grids))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.out.table(
        "concentrate.csv",
        &[
            "s",
            "t",
            "delta",
            "lhs",
            "omega_bound",
            "holds",
            "density_constant",
            "v_integral",
            "dv_integral",
            "mass_outside",
            "sample_count",
        ],
        reports.iter().zip(&deltas).map(|(r, &dl)| {
            vec![
                s.into(),
                (s + dl).into(),
                dl.into(),
                r.lhs.into(),
                r.omega_bound.into(),
                (r.lhs <= r.omega_bound).into(),
                r.density_constant.into(),
                r.v_integral.into(),
                r.dv_integral.into(),
                r.mass_outside.into(),
                r.sample_count.into(),
            ]
        }),
    )?;
    let lhs: Vec<f64> = reports.iter().map(|r| r.lhs).collect();
    let fit = scaling_exponent(&deltas, &lhs);
    if let Err(e) = &fit {
        ctx.note(format!("lhs slope: {e}"));
    }
    let (cells, _) = fit_cells(&fit);
    let mut header = vec!["quantity"];
    header.extend(FIT_COLUMNS);
    let mut rows = vec![{
        let mut r: Vec<Cell> = vec!["lhs".into()];
        r.extend(cells);
        r
    }];
    let mut variation = Value::Null;
    if !levels.is_empty() {
        match omega_variation(&tr, &field, &levels, exps, &grids) {
            Ok(var) => {
                ctx.out.table(
                    "variation.csv",
                    &["level", "mesh", "lhs_sum", "omega_sum"],
                    (0..var.levels.len()).map(|i| {
                        vec![
                            (var.levels[i] as usize).into(),
                            var.meshes[i].into(),
                            var.lhs_sums[i].into(),
                            var.omega_sums[i].into(),
                        ]
                    }),
                )?;
                let f = Ok(var.fit);
                let (cells, _) = fit_cells(&f);
                let mut r: Vec<Cell> = vec!["variation".into()];
                r.extend(cells);
                rows.push(r);
                variation = json!({"levels": var.levels, "lhs_sums": var.lhs_sums, "omega_sums": var.omega_sums, "fit": fit_json(&f)});
            }
            Err(e @ flowlab::Error::DegenerateFit(_)) => ctx.note(format!("variation: {e}")),
            Err(e) => return Err(e.into()),
        }
    }
    ctx.out.table("slopes.csv", &header, rows)?;
    if cfg.plots {
        let series = [
            Series::new(
                "lhs",
                deltas.iter().copied().zip(lhs.iter().copied()).collect(),
            ),
            Series::new(
                "omega",
                deltas
                    .iter()
                    .copied()
                    .zip(reports.iter().map(|r| r.omega_bound))
                    .collect(),
            ),
        ];
        let svg = line_chart(
            &format!("concentration, {}", field.name()),
            "delta",
            "norm",
            &series,
            true,
        )?;
        ctx.out.svg("concentrate.svg", &svg)?;
    }
    Ok(json!({
        "field": field.name(),
        "curves": curves,
        "samples": n,
        "exponents": [exps.p0, exps.p1, exps.q],
        "all_hold": reports.iter().all(|r| r.lhs <= r.omega_bound),
        "lhs_fit": fit_json(&fit),
        "variation": variation,
    }))
}

pub fn stability(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let v1 = ctx.field("windowed_swirl.V2")?;
    let d = v1.dim();
    let sec = cfg.section("stability");
    let v2 = match sec.get("second") {
        Some(name) => ctx.named_field(name)?,
        None => {
            let mut c = vec![0.0; d];
            c[d - 1] = 0.3;
            perturbed_field(&v1, vector(&sec, "c", d)?.unwrap_or(c))
        }
    };
    let method = cfg.method()?;
    let n = cfg.samples(500)?;
    let w = window(&sec, (0.0, 1.0))?;
    let partition = match list(&sec, "partition")? {
        Some(p) => p,
        None => {
            let k = sec.parse_or("intervals", 4usize)?.max(1);
            (0..=k)
                .map(|i| w.a + (w.b - w.a) * i as f64 / k as f64)
                .collect()
        }
    };
    let deltas = list(&sec, "delta")?.unwrap_or_else(|| vec![0.01]);
    let exps = exponents(&sec)?;
    let grids = ctx.bound_grids(d)?;
    let coupling = match sec.get("coupling").unwrap_or("identity") {
        "identity" => Coupling::Identity,
        "reversed" => Coupling::Pairs((0..n).map(|i| (i, n - 1 - i)).collect()),
        other => {
            return Err(CliError::Config(format!(
                "unknown coupling `{other}` (identity | reversed)"
            )))
        }
    };
    let mut singular = v1.singular_set().clone();
    singular
        .components
        .extend(v2.singular_set().components.iter().cloned());
    let ens = ctx.ensemble(&cfg.region(d)?, n, &singular)?;
    let times = sorted_times(partition.clone(), w)?;
    let method2 = match (method, v2.oracle()) {
        (FlowMethod::AnalyticOracle, None) => {
            ctx.note(format!(
                "`{}` has no closed-form flow; integrated at tol {}",
                v2.name(),
                crate::settings::DEFAULT_TOL
            ));
            FlowMethod::Numeric(crate::settings::DEFAULT_TOL)
        }
        (m, _) => m,
    };
    let tr1 = TrajectoryEnsemble::from_flow(&v1, &ens, w, &times, method)?;
    let tr2 = TrajectoryEnsemble::from_flow(&v2, &ens, w, &times, method2)?;
    let mut audits = Vec::new();
    for &delta in &deltas {
        let spec = StabilitySpec {
            partition: partition.clone(),
            delta,
            exponents: exps,
            coupling: coupling.clone(),
            grids: grids.clone(),
        };
        audits.push((delta, stability_bound_audit(&tr1, &tr2, &v1, &v2, &spec)?));
    }
    let intervals = partition.len().saturating_sub(1);
    ctx.out.table(
        "stability.csv",
        &[
            "delta",
            "intervals",
            "lhs",
            "initial_term",
            "jacobian_term",
            "difference_term",
            "omega_term",
            "rhs_total",
            "ratio",
            "density_constant_1",
            "density_constant_2",
            "pairs",
        ],
        audits.iter().map(|(delta, a)| {
            vec![
                (*delta).into(),
                intervals.into(),
                a.lhs.into(),
                a.initial_term.into(),
                a.jacobian_term.into(),
                a.difference_term.into(),
                a.omega_term.into(),
                a.rhs_total.into(),
                a.ratio.into(),
                a.density_constants[0].into(),
                a.density_constants[1].into(),
                a.pairs.into(),
            ]
        }),
    )?;
    if cfg.plots && audits.len() > 1 {
        let series = [
            Series::new("lhs", audits.iter().map(|(d, a)| (*d, a.lhs)).collect()),
            Series::new(
                "rhs",
                audits.iter().map(|(d, a)| (*d, a.rhs_total)).collect(),
            ),
        ];
        let svg = line_chart("stability bound", "delta", "value", &series, true)?;
        ctx.out.svg("stability.svg", &svg)?;
    }
    Ok(json!({
        "first": v1.name(),
        "second": v2.name(),
        "samples": n,
        "intervals": intervals,
        "max_ratio": jnum(audits.iter().map(|(_, a)| a.ratio).fold(0.0, f64::max)),
        "rows": audits.iter().map(|(d, a)| json!({"delta": d, "lhs": jnum(a.lhs), "rhs": jnum(a.rhs_total), "ratio": jnum(a.ratio)})).collect::<Vec<_>>(),
    }))
}
