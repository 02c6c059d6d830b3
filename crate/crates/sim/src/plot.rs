//! SVG line plots and heatmaps rendered from the emitted CSV files.
//!
//! Two-column files become line plots (log scale for spectra), `t_fs, x_nm,
//! rho` rasters become heatmaps. Anything else is skipped.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::AppError;
use crate::output::{read_numeric, write_atomic};

const SIZE: (u32, u32) = (900, 560);
const MAX_CELLS: (usize, usize) = (240, 160);

fn plot_err(e: impl std::fmt::Display) -> AppError {
    AppError::Plot(e.to_string())
}

/// Renders `path` next to itself as `.svg`; returns the file written, if any.
pub fn render_csv(path: &Path) -> Result<Option<PathBuf>, AppError> {
    let (header, rows) = read_numeric(path)?;
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
    let svg = match header.len() {
        2 => line_plot(&title, &header, &rows)?,
        3 if header[0] == "t_fs" && header[1] == "x_nm" => heatmap(&title, &header, &rows)?,
        _ => return Ok(None),
    };
    let Some(svg) = svg else { return Ok(None) };
    let out = path.with_extension("svg");
    write_atomic(&out, svg.as_bytes())?;
    Ok(Some(out))
}

/// Renders every CSV in `dir`.
pub fn render_dir(dir: &Path) -> Result<Vec<PathBuf>, AppError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| AppError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(render_csv(&f)?);
    }
    Ok(out)
}

fn range(v: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if lo > hi {
        return None;
    }
    Some(if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) })
}

fn line_plot(title: &str, header: &[String], rows: &[Vec<f64>]) -> Result<Option<String>, AppError> {
    let log = header[1] == "power";
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !log || r[1] > 0.0)
        .map(|r| (r[0], if log { r[1].log10() } else { r[1] }))
        .collect();
    let (Some(xr), Some(yr)) = (range(pts.iter().map(|p| p.0)), range(pts.iter().map(|p| p.1))) else {
        return Ok(None);
    };
    let ylabel = if log {
        format!("log10 {}", header[1])
    } else {
        header[1].clone()
    };
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc(header[0].as_str())
            .y_desc(ylabel.as_str())
            .draw()
            .map_err(plot_err)?;
        chart.draw_series(LineSeries::new(pts, &BLUE)).map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(Some(svg))
}

fn heatmap(title: &str, header: &[String], rows: &[Vec<f64>]) -> Result<Option<String>, AppError> {
    // rows are ordered by time, then position
    let mut times: Vec<f64> = Vec::new();
    for r in rows {
        if times.last() != Some(&r[0]) {
            times.push(r[0]);
        }
    }
    let nt = times.len();
    if nt == 0 || !rows.len().is_multiple_of(nt) {
        return Ok(None);
    }
    let nx = rows.len() / nt;
    let (Some(xr), Some(zr)) = (range(rows.iter().map(|r| r[1])), range(rows.iter().map(|r| r[2]))) else {
        return Ok(None);
    };
    let tr = (times[0], times[nt - 1].max(times[0] + 1e-9));
    let (ct, cx) = (nt.min(MAX_CELLS.1), nx.min(MAX_CELLS.0));
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(
                format!("{title} ({}: {:.3}..{:.3})", header[2], zr.0, zr.1),
                ("sans-serif", 18),
            )
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(xr.0..xr.1, tr.0..tr.1)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc(header[1].as_str())
            .y_desc(header[0].as_str())
            .draw()
            .map_err(plot_err)?;
        let dx = (xr.1 - xr.0) / cx as f64;
        let dt = (tr.1 - tr.0) / ct as f64;
        let cells = (0..ct).flat_map(|i| (0..cx).map(move |j| (i, j))).map(|(i, j)| {
            let it = (i * nt / ct).min(nt - 1);
            let ix = (j * nx / cx).min(nx - 1);
            let z = (rows[it * nx + ix][2] - zr.0) / (zr.1 - zr.0);
            let x0 = xr.0 + j as f64 * dx;
            let t0 = tr.0 + i as f64 * dt;
            Rectangle::new(
                [(x0, t0), (x0 + dx, t0 + dt)],
                HSLColor(0.66 * (1.0 - z), 0.85, 0.5).filled(),
            )
        });
        chart.draw_series(cells).map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(Some(svg))
}
