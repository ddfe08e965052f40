use flowlab::measure::{
    compressibility_estimate, maximal_function, pushforward_density, sample_pairs,
    sharp_maximal_decay, sharp_maximal_function, sobolev_pointwise_audit, MaximalEngine, RadiusNet,
    ScalarGridField, SobolevGrids, SobolevOrder,
};
use serde_json::{json, Value};

use super::Ctx;
use crate::error::CliError;
use crate::output::{jnum, Cell};
use crate::plot::{line_chart, Series};
use crate::settings::{list, number, vector, words};

pub fn compress(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let field = ctx.field("helix.V1")?;
    let d = field.dim();
    let method = cfg.method()?;
    let n = cfg.samples(100_000)?;
    let grid = cfg.grid("grid", d, -4.0, 4.0, 32)?;
    let sec = cfg.section("compress");
    let times = list(&sec, "times")?.unwrap_or_else(|| vec![0.5, 1.0]);
    let ens = ctx.ensemble(&cfg.region(d)?, n, field.singular_set())?;
    let rep = compressibility_estimate(&field, &ens, &times, method, &grid)?;
    ctx.out.table(
        "compress.csv",
        &[
            "t",
            "density_ratio",
            "pushed_sup",
            "initial_sup",
            "tolerance",
            "failed",
        ],
        (0..rep.times.len()).map(|i| {
            vec![
                rep.times[i].into(),
                rep.density_sup[i].into(),
                rep.pushed_sup[i].into(),
                rep.initial_sup.into(),
                rep.tolerance.into(),
                rep.failed[i].into(),
            ]
        }),
    )?;
    if sec.parse_or("write_density", false)? {
        for (i, &t) in times.iter().enumerate() {
            let pf = pushforward_density(&ens, &field, t, method, &grid)?;
            ctx.out
                .csv_text(&format!("density_{i}.csv"), &pf.density.to_csv())?;
        }
    }
    if cfg.plots {
        let s = Series::new(
            "sup ratio",
            rep.times
                .iter()
                .copied()
                .zip(rep.density_sup.iter().copied())
                .collect(),
        );
        let svg = line_chart(
            &format!("compressibility, {}", field.name()),
            "t",
            "ratio",
            &[s],
            false,
        )?;
        ctx.out.svg("compress.svg", &svg)?;
    }
    let max_dev = rep
        .density_sup
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "field": field.name(),
        "samples": rep.sample_count,
        "bins": rep.bin_count,
        "c_estimate": jnum(rep.c_estimate),
        "tolerance": jnum(rep.tolerance),
        "max_deviation": jnum(max_dev),
        "within_tolerance": max_dev <= rep.tolerance,
    }))
}

fn sample_grid(
    ctx: &Ctx,
    dim: usize,
) -> Result<(flowlab::Function, ScalarGridField<f64>), CliError> {
    let f = ctx.cfg.function("bump", dim)?;
    let grid = ctx.cfg.grid("grid", f.dim, -1.0, 1.0, 64)?;
    let g = ScalarGridField::from_fn(grid, |x| f.value(x))?;
    Ok((f, g))
}

pub fn maximal(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let (f, g) = sample_grid(ctx, 2)?;
    let grid = g.grid.clone();
    let sec = cfg.section("maximal");
    let p = number(&sec, "p")?.unwrap_or(2.0);
    let r_max = number(&sec, "r_max")?.unwrap_or(0.25);
    let levels = sec.parse_or("levels", 4usize)?;
    let radii: Vec<f64> = match list(&sec, "radii")? {
        Some(r) => r,
        None => (0..levels).map(|k| r_max / 2f64.powi(k as i32)).collect(),
    };
    let decay = sharp_maximal_decay(&g, p, &radii)?;
    let engine = MaximalEngine::new(&g, RadiusNet::for_grid(&grid));
    let star = engine.star_grid();
    let mut bound_rows = Vec::new();
    let mut violations_total = 0usize;
    for &r in &radii {
        let sharp = engine.sharp_grid(r);
        let violations = sharp
            .values
            .iter()
            .zip(&star.values)
            .filter(|(s, m)| **s > 2.0 * **m)
            .count();
        let worst = sharp
            .values
            .iter()
            .zip(&star.values)
            .filter(|(_, m)| **m > 0.0)
            .map(|(s, m)| s / (2.0 * m))
            .fold(0.0, f64::max);
        violations_total += violations;
        bound_rows.push(vec![r.into(), violations.into(), worst.into()]);
    }
    ctx.out.table(
        "maximal.csv",
        &["r", "norm", "interior_norm"],
        (0..decay.radii.len()).map(|i| {
            vec![
                decay.radii[i].into(),
                decay.norms[i].into(),
                decay.interior_norms[i].into(),
            ]
        }),
    )?;
    ctx.out
        .table("bound.csv", &["r", "violations", "max_ratio"], bound_rows)?;
    if let Some(x) = vector(&sec, "probe", grid.dim())? {
        let star_x = maximal_function(&g, &x, None)?;
        let rows = radii
            .iter()
            .map(|&r| {
                Ok(vec![
                    r.into(),
                    star_x.into(),
                    sharp_maximal_function(&g, &x, r, None)?.into(),
                ])
            })
            .collect::<Result<Vec<Vec<Cell>>, CliError>>()?;
        ctx.out.table("probe.csv", &["r", "star", "sharp"], rows)?;
    }
    if cfg.plots {
        let series = [
            Series::new(
                "norm",
                decay
                    .radii
                    .iter()
                    .copied()
                    .zip(decay.norms.iter().copied())
                    .collect(),
            ),
            Series::new(
                "interior",
                decay
                    .radii
                    .iter()
                    .copied()
                    .zip(decay.interior_norms.iter().copied())
                    .collect(),
            ),
        ];
        let svg = line_chart(
            &format!("sharp maximal decay, {}", f.name),
            "r",
            "norm",
            &series,
            true,
        )?;
        ctx.out.svg("maximal.svg", &svg)?;
    }
    Ok(json!({
        "function": f.name,
        "cells": grid.shape,
        "p": p,
        "strictly_decreasing": decay.strictly_decreasing,
        "interior_strictly_decreasing": decay.interior_norms.windows(2).all(|w| w[1] < w[0]),
        "sandwich_violations": violations_total,
    }))
}

pub fn sobolev(ctx: &mut Ctx) -> Result<Value, CliError> {
    let cfg = ctx.cfg;
    let (f, g) = sample_grid(ctx, 2)?;
    let grid = g.grid.clone();
    let sec = cfg.section("sobolev");
    let orders = words(&sec, "orders", "first_sharp,first_star,second")
        .into_iter()
        .map(|w| w.parse::<SobolevOrder>())
        .collect::<Result<Vec<_>, _>>()?;
    let n = sec.parse_or("pairs", 2000usize)?;
    let h = grid.cell_sizes().into_iter().fold(0.0, f64::max);
    let sep_lo = number(&sec, "sep_lo")?.unwrap_or(2.0 * h);
    let sep_hi = number(&sec, "sep_hi")?.unwrap_or(0.25);
    let margin = number(&sec, "margin")?.unwrap_or(0.0);
    let pairs = sample_pairs(&grid, n, cfg.seed, sep_lo, sep_hi, margin)?;
    let mut grids = vec![grid.clone()];
    if sec.parse_or("refine", false)? {
        grids.push(grid.refined(2));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for gr in &grids {
        let sg = SobolevGrids::from_fn(&f, gr)?;
        for &order in &orders {
            let a = sobolev_pointwise_audit(&sg, order, &pairs, None)?;
            let name = match order {
                SobolevOrder::FirstSharp => "first_sharp",
                SobolevOrder::FirstStar => "first_star",
                SobolevOrder::Second => "second",
            };
            rows.push(vec![
                name.into(),
                gr.shape[0].into(),
                a.max_ratio.into(),
                a.mean_ratio.into(),
                a.max_lhs.into(),
                a.pairs_used.into(),
                a.zero_denominator.into(),
                a.excluded.into(),
                a.first_remainder_max_ratio.into(),
            ]);
            summary.push(json!({
                "order": name, "cells": gr.shape[0],
                "max_ratio": jnum(a.max_ratio), "max_lhs": jnum(a.max_lhs), "pairs_used": a.pairs_used,
            }));
        }
    }
    ctx.out.table(
        "sobolev.csv",
        &[
            "order",
            "cells",
            "max_ratio",
            "mean_ratio",
            "max_lhs",
            "pairs_used",
            "zero_denominator",
            "excluded",
            "first_remainder_max_ratio",
        ],
        rows,
    )?;
    Ok(json!({"function": f.name, "pairs": n, "audits": summary}))
}
