use flowlab::commute::pair_singular_set;
use flowlab::field::{divergence, eval_field, jacobian, lie_bracket, DiffMethod};
use flowlab::flow::{
    chain_rule_residual, escape_time_bound, flow_map, integrate_trajectory, sup_norm_on_ball,
    FlowMethod,
};
use flowlab::linalg::{dist, norm};
use flowlab::Field;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{window, Ctx};
use crate::error::CliError;
use crate::output::{jnum, Cell};
use crate::plot::{line_chart, Series};
use crate::settings::{number, vector, DEFAULT_TOL};

fn describe(f: &Field) -> [Cell; 4] {
    [
        f.has_analytic_jacobian().into(),
        f.oracle().is_some().into(),
        f.is_time_dependent().into(),
        f.singular_set().components.len().into(),
    ]
}

pub fn catalog(ctx: &mut Ctx) -> Result<Value, CliError> {
    let mut rows = Vec::new();
    let pairs: Vec<_> = ctx.registry.pairs().cloned().collect();
    for p in &pairs {
        let (a, b) = (describe(&p.first), describe(&p.second));
        let both = |i: usize| match (&a[i], &b[i]) {
            (Cell::I(x), Cell::I(y)) => Cell::I(if i == 3 { x + y } else { x * y }),
            _ => Cell::Empty,
        };
        let mut row: Vec<Cell> = vec!["pair".into(), p.name.clone().into(), p.dim().into()];
        row.extend((0..4).map(both));
        row.push(p.bracket_vanishes_ae.into());
        rows.push(row);
    }
    let names: Vec<String> = ctx.registry.field_names().map(String::from).collect();
    for name in &names {
        let f = ctx.named_field(name)?;
        let mut row: Vec<Cell> = vec!["field".into(), name.clone().into(), f.dim().into()];
        row.extend(describe(&f));
        row.push(Cell::Empty);
        rows.push(row);
    }
    ctx.out.table(
        "catalog.csv",
        &[
            "kind",
            "name",
            "dim",
            "analytic_jacobian",
            "oracle",
            "time_dependent",
            "singular_components",
            "bracket_vanishes_ae",
        ],
        rows,
    )?;
    Ok(json!({
        "pairs": pairs.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
        "fields": names,
    }))
}

pub fn bracket(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let pair = ctx.pair("helix")?;
    let d = pair.dim();
    let n = cfg.samples(10_000)?;
    let sec = cfg.section("bracket");
    let analytic = pair.first.has_analytic_jacobian() && pair.second.has_analytic_jacobian();
    let diff = match sec
        .get("diff")
        .unwrap_or(if analytic { "analytic" } else { "central" })
    {
        "analytic" => DiffMethod::Analytic,
        "central" => match number(&sec, "h")? {
            Some(h) => DiffMethod::CentralDifference(h),
            None => DiffMethod::central(),
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown diff `{other}` (analytic | central)"
            )))
        }
    };
    let t = number(&sec, "t")?.unwrap_or(0.0);
    let mut singular = pair_singular_set(&pair);
    if cfg.exclusion()?.is_none() {
        singular = singular.with_exclusion(0.05);
    }
    let ens = ctx.ensemble(&cfg.region(d)?, n, &singular)?;
    let rows = (0..ens.len())
        .into_par_iter()
        .map(|i| {
            let x = ens.point(i);
            let b = lie_bracket(&pair, x, t, diff)?;
            let div1 = divergence(&pair.first, x, t, diff)?;
            let div2 = divergence(&pair.second, x, t, diff)?;
            let gap = if analytic {
                let mut g = 0.0f64;
                for f in [&pair.first, &pair.second] {
                    let ja = jacobian(f, x, t, DiffMethod::Analytic)?;
                    let jc = jacobian(f, x, t, DiffMethod::central())?;
                    g = g.max(ja.max_abs_diff(&jc));
                }
                Some(g)
            } else {
                None
            };
            let speed =
                norm(&eval_field(&pair.first, x, t)?).max(norm(&eval_field(&pair.second, x, t)?));
            Ok((x.to_vec(), b, div1, div2, gap, speed))
        })
        .collect::<Result<Vec<_>, flowlab::Error>>()?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.extend((1..=d).map(|i| format!("bracket_{i}")));
    header.extend(["bracket_norm", "div_1", "div_2", "jacobian_gap", "speed"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.out.table(
        "bracket.csv",
        &header,
        rows.iter().map(|(x, b, d1, d2, gap, speed)| {
            let mut c: Vec<Cell> = x.iter().chain(b).map(|&v| Cell::F(v)).collect();
            c.extend([
                norm(b).into(),
                (*d1).into(),
                (*d2).into(),
                (*gap).into(),
                (*speed).into(),
            ]);
            c
        }),
    )?;
    let max_abs = rows
        .iter()
        .flat_map(|r| r.1.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let mean_norm = rows.iter().map(|r| norm(&r.1)).sum::<f64>() / rows.len() as f64;
    let max_gap = rows.iter().filter_map(|r| r.4).fold(0.0, f64::max);
    Ok(json!({
        "pair": pair.name,
        "samples": rows.len(),
        "max_abs_bracket": jnum(max_abs),
        "mean_bracket_norm": jnum(mean_norm),
        "max_abs_divergence": jnum(rows.iter().map(|r| r.2.abs().max(r.3.abs())).fold(0.0, f64::max)),
        "max_jacobian_gap": if analytic { jnum(max_gap) } else { Value::Null },
    }))
}

pub fn trajectory(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let field = ctx.field("helix.V1")?;
    let d = field.dim();
    let sec = cfg.section("trajectory");
    let x0 = vector(&sec, "x0", d)?.unwrap_or_else(|| vec![-1.0; d]);
    let w = window(&sec, (0.0, 2.0))?;
    let tol = number(cfg.root(), "tol")?.unwrap_or(DEFAULT_TOL);
    let traj = integrate_trajectory(&field, &x0, w, tol)?;
    ctx.out.csv_text("trajectory.csv", &traj.to_csv())?;

    let end = traj
        .end()
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| x0.clone());
    let oracle_gap = if field.oracle().is_some() && (!field.is_time_dependent() || w.a == 0.0) {
        let exact = flow_map(&field, &x0, w.b - w.a, FlowMethod::AnalyticOracle)?;
        Some(dist(&exact.point, &end))
    } else {
        None
    };
    let f = cfg.function("linear", d)?;
    let chain = chain_rule_residual(&f, &field, &traj)?;

    let esc = cfg.section("escape");
    let center = vector(&esc, "center", d)?.unwrap_or_else(|| x0.clone());
    let inner = number(&esc, "inner")?.unwrap_or(0.5);
    let outer = number(&esc, "outer")?.unwrap_or(1.0);
    let horizon = number(&esc, "horizon")?.unwrap_or(w.b - w.a);
    let per_axis = esc.parse_or("per_axis", 9usize)?;
    let sup = sup_norm_on_ball(&field, &center, outer, w.a, per_axis)?;
    let bound = escape_time_bound(inner, outer, sup, horizon)?;
    let exit = traj
        .times
        .iter()
        .zip(&traj.states)
        .find(|(_, x)| dist(x, &center) >= outer)
        .map(|(&t, _)| t - w.a);
    if dist(&x0, &center) > inner {
        ctx.note("x0 lies outside the inner escape ball; the escape bound does not apply");
    }
    ctx.out.table(
        "lemmas.csv",
        &[
            "steps",
            "crossings",
            "oracle_gap",
            "chain_max",
            "chain_mean",
            "chain_intervals",
            "chain_skipped",
            "sup_speed",
            "escape_bound",
            "exit_time",
        ],
        [vec![
            traj.len().into(),
            traj.crossings.len().into(),
            oracle_gap.into(),
            chain.max.into(),
            chain.mean.into(),
            chain.intervals.into(),
            chain.skipped.into(),
            sup.into(),
            bound.into(),
            exit.into(),
        ]],
    )?;
    if cfg.plots && d >= 2 {
        let s = Series::new("path", traj.states.iter().map(|x| (x[0], x[1])).collect());
        let svg = line_chart(
            &format!("trajectory, {}", field.name()),
            "x1",
            "x2",
            &[s],
            false,
        )?;
        ctx.out.svg("trajectory.svg", &svg)?;
    }
    Ok(json!({
        "field": field.name(),
        "x0": x0,
        "end": end,
        "steps": traj.len(),
        "crossings": traj.crossings.len(),
        "oracle_gap": oracle_gap.map(jnum),
        "chain_rule_max": jnum(chain.max),
        "escape_bound": jnum(bound),
        "exit_time": exit.map(jnum),
    }))
}
