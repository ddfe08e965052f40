//! SVG figures.

use plotters::prelude::*;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(format!("plot rendering: {e}"))
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        Some((lo - 0.5, hi + 0.5))
    } else {
        let pad = 0.05 * (hi - lo);
        Some((lo - pad, hi + pad))
    }
}

/// Line chart; with `log` both axes show `log10` of the data and
/// nonpositive points are dropped.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log: bool,
) -> Result<String, CliError> {
    let tf = |v: f64| if log { v.log10() } else { v };
    let data: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| !log || (*x > 0.0 && *y > 0.0))
                .map(|&(x, y)| (tf(x), tf(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let xr = range(data.iter().flatten().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let yr = range(data.iter().flatten().map(|p| p.1)).unwrap_or((0.0, 1.0));
    let (xl, yl) = if log {
        (format!("log10 {x_label}"), format!("log10 {y_label}"))
    } else {
        (x_label.to_string(), y_label.to_string())
    };
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(56)
            .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc(xl)
            .y_desc(yl)
            .draw()
            .map_err(plot_err)?;
        for (i, (s, pts)) in series.iter().zip(&data).enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(s.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(plot_err)?;
        }
        if series.len() > 1 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Colour map of `values[i * ys.len() + j]` at `(xs[i], ys[j])`.
pub fn heat_map(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[f64],
) -> Result<String, CliError> {
    let edges = |c: &[f64]| -> Vec<f64> {
        if c.len() == 1 {
            return vec![c[0] - 0.5, c[0] + 0.5];
        }
        let mut e = vec![c[0] - 0.5 * (c[1] - c[0])];
        e.extend(c.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        e.push(c[c.len() - 1] + 0.5 * (c[c.len() - 1] - c[c.len() - 2]));
        e
    };
    let (xe, ye) = (edges(xs), edges(ys));
    let vmax = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (600, 520)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(48)
            .build_cartesian_2d(xe[0]..xe[xe.len() - 1], ye[0]..ye[ye.len() - 1])
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc(x_label)
            .y_desc(y_label)
            .draw()
            .map_err(plot_err)?;
        let cells = (0..xs.len()).flat_map(|i| (0..ys.len()).map(move |j| (i, j)));
        chart
            .draw_series(cells.map(|(i, j)| {
                let v = values[i * ys.len() + j];
                let u = if vmax > 0.0 && v.is_finite() {
                    (v / vmax).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let color = HSLColor(0.66 * (1.0 - u), 0.8, 0.5);
                Rectangle::new([(xe[i], ye[j]), (xe[i + 1], ye[j + 1])], color.filled())
            }))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_renders() {
        let s = Series::new("A", vec![(0.125, 0.1), (0.0625, 0.05), (0.03125, 0.025)]);
        let svg = line_chart("slopes", "delta", "value", &[s.clone(), s], true).unwrap();
        assert!(svg.contains("<svg") && svg.contains("slopes"));
    }

    #[test]
    fn heat_map_renders() {
        let svg = heat_map(
            "m",
            "s",
            "t",
            &[0.5, 1.0],
            &[1.0, 2.0, 3.0],
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap();
        assert!(svg.contains("<rect"));
    }
}
