//! SVG line charts from the CSV files written by the runner.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::to_db;

type Series = Vec<(String, Vec<(f64, f64)>)>;

struct Chart {
    suffix: &'static str,
    title: &'static str,
    x_desc: &'static str,
    y_desc: &'static str,
    series: Series,
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn parse_f64(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Plot(format!("row {row}: '{s}' in column {col} is not a number")))
}

/// Groups `(x, y)` by the `algorithm` column, preserving first-seen order.
fn group(rows: &[csv::StringRecord], algo: Option<usize>, x: usize, y: usize, names: &[&str], y_map: fn(f64) -> f64) -> Result<Series> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (k, rec) in rows.iter().enumerate() {
        let label = algo.map_or_else(|| "predicted".to_owned(), |a| rec[a].to_owned());
        let xv = parse_f64(&rec[x], k + 1, names[x])?;
        let yv = y_map(parse_f64(&rec[y], k + 1, names[y])?);
        if !map.contains_key(&label) {
            order.push(label.clone());
        }
        if yv.is_finite() {
            map.entry(label).or_default().push((xv, yv));
        } else {
            map.entry(label).or_default();
        }
    }
    Ok(order.into_iter().map(|l| {
        let pts = map.remove(&l).unwrap_or_default();
        (l, pts)
    }).collect())
}

fn read_charts(path: &Path) -> Result<Vec<Chart>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let names: Vec<&str> = headers.iter().map(String::as_str).collect();
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Plot(format!("{} has no data rows", path.display())));
    }
    let identity: fn(f64) -> f64 = |v| v;
    let db: fn(f64) -> f64 = to_db;
    match names.as_slice() {
        ["algorithm", "snapshot", "sinr_db", "mse", "rank"] => Ok(vec![
            Chart {
                suffix: "sinr",
                title: "SINR vs snapshot",
                x_desc: "snapshot",
                y_desc: "SINR (dB)",
                series: group(&rows, Some(0), 1, 2, &names, identity)?,
            },
            Chart {
                suffix: "mse",
                title: "MSE vs snapshot",
                x_desc: "snapshot",
                y_desc: "MSE (dB)",
                series: group(&rows, Some(0), 1, 3, &names, db)?,
            },
        ]),
        ["algorithm", "rank", "sinr_db", "mse"] => Ok(vec![Chart {
            suffix: "sinr_rank",
            title: "SINR vs rank",
            x_desc: "rank D",
            y_desc: "SINR (dB)",
            series: group(&rows, Some(0), 1, 2, &names, identity)?,
        }]),
        ["snapshot", "predicted_mse"] => Ok(vec![Chart {
            suffix: "mse",
            title: "Predicted MSE vs snapshot",
            x_desc: "snapshot",
            y_desc: "MSE (dB)",
            series: group(&rows, None, 0, 1, &names, db)?,
        }]),
        _ => Err(Error::Plot(format!("unrecognized CSV header: {}", headers.join(",")))),
    }
}

fn bounds(series: &Series) -> Result<((f64, f64), (f64, f64))> {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(Error::Plot("no finite points to plot".into()));
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(0.5);
    Ok(((x0, x1), (y0 - pad, y1 + pad)))
}

fn render(chart: &Chart) -> Result<String> {
    let ((x0, x1), (y0, y1)) = bounds(&chart.series)?;
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 520)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut ctx = ChartBuilder::on(&root)
            .caption(chart.title, ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(56)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_err)?;
        ctx.configure_mesh().x_desc(chart.x_desc).y_desc(chart.y_desc).draw().map_err(plot_err)?;
        for (k, (label, pts)) in chart.series.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            ctx.draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(label.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        ctx.configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::LowerRight)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Writes one SVG per metric next to `csv_path` and returns their paths.
/// Nothing is written unless every chart renders.
pub fn emit_plots(csv_path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = csv_path.as_ref();
    let charts = read_charts(path)?;
    let rendered = charts.iter().map(render).collect::<Result<Vec<_>>>()?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (chart, svg) in charts.iter().zip(rendered) {
        let target = dir.join(format!("{stem}_{}.svg", chart.suffix));
        std::fs::write(&target, svg)?;
        out.push(target);
    }
    Ok(out)
}
