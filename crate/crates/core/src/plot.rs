//! Static SVG figures of a trajectory.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use plotters::prelude::*;

use crate::contact::WaterModel;
use crate::dynamics::Model;
use crate::error::{Result, SnakeError};
use crate::params::RobotParams;
use crate::sim::{centroid_path, Trajectory};

const SIZE: (u32, u32) = (800, 600);
const WET: RGBColor = RGBColor(200, 30, 30);
const DRY: RGBColor = RGBColor(60, 90, 200);

fn plot_err<E: std::fmt::Display>(e: E) -> SnakeError {
    SnakeError::Plot(e.to_string())
}

// Range over `values` padded by 5 % and never thinner than `min_width`.
fn span(values: impl Iterator<Item = f64>, min_width: f64) -> Range<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let mid = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(0.5 * min_width) * 1.05;
    mid - half..mid + half
}

/// Top-down path of the mass centroid.
pub fn path_svg(path: &[Vector3<f64>]) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let xs = span(path.iter().map(|p| p.x), 0.02);
        let ys = span(path.iter().map(|p| p.y), 0.02);
        // Same scale on both axes.
        let w = (xs.end - xs.start).max(ys.end - ys.start);
        let (cx, cy) = (0.5 * (xs.start + xs.end), 0.5 * (ys.start + ys.end));
        let mut chart = ChartBuilder::on(&root)
            .caption("centroid path (top view)", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(cx - 0.5 * w..cx + 0.5 * w, cy - 0.5 * w..cy + 0.5 * w)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("x (m)")
            .y_desc("y (m)")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(path.iter().map(|p| (p.x, p.y)), &BLUE))
            .map_err(plot_err)?;
        let ends = [path[0], path[path.len() - 1]];
        chart
            .draw_series(
                ends.iter()
                    .zip([GREEN, RED])
                    .map(|(p, c)| Circle::new((p.x, p.y), 5, c.filled())),
            )
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Base height against time.
pub fn base_height_svg(trajectory: &Trajectory) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let samples = &trajectory.samples;
        let t_end = samples[samples.len() - 1].t.max(1e-3);
        let zs = span(samples.iter().map(|s| s.state.q[2]).chain([0.0]), 0.01);
        let mut chart = ChartBuilder::on(&root)
            .caption("base height", ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..t_end, zs)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("t (s)")
            .y_desc("z (m)")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new([(0.0, 0.0), (t_end, 0.0)], &CYAN))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                samples.iter().map(|s| (s.t, s.state.q[2])),
                &BLUE,
            ))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Skin grid at one sample: top view and side view, submerged points in
/// red.
pub fn skin_svg(
    trajectory: &Trajectory,
    sample: usize,
    params: &RobotParams,
    water: &WaterModel,
) -> Result<String> {
    let state = &trajectory.samples[sample].state;
    let model = Model::new(params, water);
    let chain = model.chain(&state.q)?;
    let points = model.contact().positions(&chain);
    let wet: Vec<bool> = points.iter().map(|p| p.z < water.surface_z).collect();

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 900)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let (top, side) = root.split_vertically(600);
        let title = format!("skin points at t = {:.2} s", trajectory.samples[sample].t);

        let xs = span(points.iter().map(|p| p.x), 0.05);
        let ys = span(points.iter().map(|p| p.y), 0.05);
        let w = (xs.end - xs.start).max(ys.end - ys.start);
        let (cx, cy) = (0.5 * (xs.start + xs.end), 0.5 * (ys.start + ys.end));
        let mut chart = ChartBuilder::on(&top)
            .caption(title, ("sans-serif", 22))
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(cx - 0.5 * w..cx + 0.5 * w, cy - 0.5 * w..cy + 0.5 * w)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("x (m)")
            .y_desc("y (m)")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(points.iter().zip(&wet).map(|(p, &w)| {
                Circle::new((p.x, p.y), 2, if w { WET } else { DRY }.filled())
            }))
            .map_err(plot_err)?;

        let zs = span(points.iter().map(|p| p.z).chain([water.surface_z]), 0.02);
        let mut chart = ChartBuilder::on(&side)
            .margin(15)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(xs.clone(), zs)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("x (m)")
            .y_desc("z (m)")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                [(xs.start, water.surface_z), (xs.end, water.surface_z)],
                &CYAN,
            ))
            .map_err(plot_err)?;
        chart
            .draw_series(points.iter().zip(&wet).map(|(p, &w)| {
                Circle::new((p.x, p.z), 2, if w { WET } else { DRY }.filled())
            }))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Writes `<stem>_path.svg`, `<stem>_skin.svg` (at the sample nearest
/// `snapshot_time`, default the last one) and `<stem>_base_z.svg` into
/// `out_dir`. All figures are rendered before anything is written, so a
/// failure leaves no partial set behind.
pub fn emit_plots(
    trajectory: &Trajectory,
    params: &RobotParams,
    water: &WaterModel,
    out_dir: &Path,
    stem: &str,
    snapshot_time: Option<f64>,
) -> Result<Vec<PathBuf>> {
    if trajectory.is_empty() {
        return Err(SnakeError::EmptyTrajectory);
    }
    let samples = &trajectory.samples;
    let snapshot = match snapshot_time {
        None => samples.len() - 1,
        Some(t) => samples
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.t - t).abs().total_cmp(&(b.1.t - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0),
    };
    let path = centroid_path(trajectory, params)?;
    let figures = [
        ("path", path_svg(&path)?),
        ("skin", skin_svg(trajectory, snapshot, params, water)?),
        ("base_z", base_height_svg(trajectory)?),
    ];
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(figures.len());
    for (name, svg) in figures {
        let file = out_dir.join(format!("{stem}_{name}.svg"));
        fs::write(&file, svg)?;
        written.push(file);
    }
    Ok(written)
}
