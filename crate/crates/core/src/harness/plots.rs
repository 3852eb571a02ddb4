use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::sim::TraceRecord;

use super::sweep::HarnessError;

const MAX_POINTS: usize = 2000;
const SIZE: (u32, u32) = (900, 500);

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn decimated(trace: &[TraceRecord]) -> impl Iterator<Item = &TraceRecord> + Clone {
    let stride = trace.len().div_ceil(MAX_POINTS).max(1);
    trace.iter().step_by(stride)
}

fn span(values: impl Iterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return -1.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    lo - pad..hi + pad
}

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

type Series<'a> = (String, Box<dyn Fn(&TraceRecord) -> f64 + 'a>);

fn time_plot(path: &Path, title: &str, y_label: &str, trace: &[TraceRecord], series: &[Series]) -> Result<(), HarnessError> {
    let pts = decimated(trace);
    let x_range = span(pts.clone().map(|r| r.t));
    let y_range = span(series.iter().flat_map(|(_, f)| pts.clone().map(f)));

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x_range, y_range)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t (s)").y_desc(y_label).draw().map_err(plot_err)?;
    for (i, (name, f)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.clone().map(|r| (r.t, f(r))), &color))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn top_view(path: &Path, trace: &[TraceRecord]) -> Result<(), HarnessError> {
    let pts = decimated(trace);
    let xs = span(pts.clone().flat_map(|r| [r.state.p.x, r.p_ref.x]));
    let ys = span(pts.clone().flat_map(|r| [r.state.p.y, r.p_ref.y]));
    // equal axis scaling
    let half = (xs.end - xs.start).max(ys.end - ys.start) / 2.0;
    let (cx, cy) = ((xs.start + xs.end) / 2.0, (ys.start + ys.end) / 2.0);

    let root = SVGBackend::new(path, (600, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Trajectory, top view", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(cx - half..cx + half, cy - half..cy + half)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw().map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(pts.clone().map(|r| (r.p_ref.x, r.p_ref.y)), &PALETTE[7]))
        .map_err(plot_err)?
        .label("reference")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], PALETTE[7]));
    chart
        .draw_series(LineSeries::new(pts.map(|r| (r.state.p.x, r.state.p.y)), &PALETTE[0]))
        .map_err(plot_err)?
        .label("vehicle")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], PALETTE[0]));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Writes `velocity.svg`, `trajectory.svg`, `thrust_gain.svg` and
/// `gamma.svg` into `out_dir` and returns their paths.
pub fn emit_plots(trace: &[TraceRecord], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if trace.is_empty() {
        return Err(HarnessError::Plot("trace is empty".into()));
    }
    fs::create_dir_all(out_dir)?;
    let files: Vec<PathBuf> = ["velocity.svg", "trajectory.svg", "thrust_gain.svg", "gamma.svg"]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();

    let velocity: Vec<Series> = vec![
        ("v_x".into(), Box::new(|r: &TraceRecord| r.state.v.x)),
        ("v_y".into(), Box::new(|r: &TraceRecord| r.state.v.y)),
        ("v_z".into(), Box::new(|r: &TraceRecord| r.state.v.z)),
    ];
    time_plot(&files[0], "Velocity", "v (m/s)", trace, &velocity)?;
    top_view(&files[1], trace)?;
    let gain: Vec<Series> = vec![("k_t".into(), Box::new(|r: &TraceRecord| r.k_t))];
    time_plot(&files[2], "Thrust gain", "k_t", trace, &gain)?;
    let gamma: Vec<Series> = (0..8)
        .map(|i| (format!("gamma{}", i + 1), Box::new(move |r: &TraceRecord| r.gamma[i]) as Box<dyn Fn(&TraceRecord) -> f64>))
        .collect();
    time_plot(&files[3], "Rate-channel parameters", "gamma", trace, &gamma)?;
    Ok(files)
}
