use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::sim::{run_scenario, write_trace_csv, RunSummary, SimOutcome};

use super::config::{Mode, ScenarioConfig};

pub const SWEEP_PAYLOAD_MASSES: [f64; 2] = [0.2, 0.5];
pub const SWEEP_DROP_HEIGHTS: [f64; 3] = [0.2, 0.5, 0.8];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("plotting failed: {0}")]
    Plot(String),
}

/// The 2×3 payload-mass by drop-height grid, mass-major.
pub fn default_grid() -> Vec<(f64, f64)> {
    SWEEP_PAYLOAD_MASSES
        .iter()
        .flat_map(|&m| SWEEP_DROP_HEIGHTS.iter().map(move |&h| (m, h)))
        .collect()
}

/// One sweep cell. `error` is set when the cell could not be run at all;
/// its MAE fields are then NaN and `failed` is true.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub summary: RunSummary,
    pub trace_file: Option<PathBuf>,
    pub error: Option<String>,
}

/// File stem used for a run's trace and summary, e.g. `static_m0.50_h0.80`.
pub fn run_stem(cfg: &ScenarioConfig) -> String {
    format!(
        "{}_m{:.2}_h{:.2}",
        cfg.scenario.mode.label(),
        cfg.scenario.payload_mass,
        cfg.scenario.drop_height
    )
}

/// Writes `<stem>.csv` (full trace) and `<stem>.json` (summary) into `dir`.
pub fn write_run(dir: &Path, stem: &str, outcome: &SimOutcome, cfg: &ScenarioConfig) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir)?;
    let trace_path = dir.join(format!("{stem}.csv"));
    write_trace_csv(&outcome.trace, BufWriter::new(File::create(&trace_path)?))?;
    let mut json = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
    serde_json::to_writer_pretty(&mut json, &outcome.summary(cfg))?;
    json.write_all(b"\n")?;
    json.flush()?;
    Ok(trace_path)
}

fn failed_summary(cfg: &ScenarioConfig) -> RunSummary {
    RunSummary {
        mode: cfg.scenario.mode.label().to_string(),
        payload_mass: cfg.scenario.payload_mass,
        drop_height: cfg.scenario.drop_height,
        mae_v_cm_s: f64::NAN,
        mae_p_cm: f64::NAN,
        failed: true,
        impulse_ns: f64::NAN,
        nmpc_failures: 0,
        runtime_s: 0.0,
    }
}

/// Runs every `(m_P, h_P)` cell of `grid` in `mode` on top of `base`, in
/// parallel. Results come back in grid order. With `out_dir`, each cell's
/// trace and summary are written there as the cell finishes.
pub fn run_sweep(
    base: &ScenarioConfig,
    mode: Mode,
    grid: &[(f64, f64)],
    out_dir: Option<&Path>,
) -> Result<Vec<SweepCell>, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    grid.par_iter()
        .map(|&(m, h)| {
            let mut cfg = base.clone();
            cfg.scenario.mode = mode;
            cfg.scenario.payload_mass = m;
            cfg.scenario.drop_height = h;
            let outcome = match run_scenario(&cfg) {
                Ok(o) => o,
                Err(e) => {
                    return Ok(SweepCell { summary: failed_summary(&cfg), trace_file: None, error: Some(e.to_string()) })
                }
            };
            let trace_file = match out_dir {
                Some(dir) => Some(write_run(dir, &run_stem(&cfg), &outcome, &cfg)?),
                None => None,
            };
            Ok(SweepCell { summary: outcome.summary(&cfg), trace_file, error: None })
        })
        .collect()
}

pub const SUMMARY_COLUMNS: [&str; 7] = ["mode", "m_P", "h_P", "MAE_v_cm_s", "MAE_p_cm", "failed", "impulse_Ns"];

pub fn write_summary_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for c in cells {
        let s = &c.summary;
        w.write_record([
            s.mode.clone(),
            s.payload_mass.to_string(),
            s.drop_height.to_string(),
            s.mae_v_cm_s.to_string(),
            s.mae_p_cm.to_string(),
            s.failed.to_string(),
            s.impulse_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text rendering of the sweep summary.
pub fn format_summary_table(cells: &[SweepCell]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>6} {:>6} {:>12} {:>10} {:>7} {:>11}",
        "mode", "m_P", "h_P", "MAE_v cm/s", "MAE_p cm", "failed", "impulse Ns"
    );
    for c in cells {
        let s = &c.summary;
        let _ = writeln!(
            out,
            "{:<8} {:>6.2} {:>6.2} {:>12.3} {:>10.3} {:>7} {:>11.4}",
            s.mode, s.payload_mass, s.drop_height, s.mae_v_cm_s, s.mae_p_cm, s.failed, s.impulse_ns
        );
    }
    out
}
