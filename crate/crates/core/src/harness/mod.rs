//! Scenario configuration, reference trajectories, sweeps and plots.

mod config;
mod plots;
mod reference;
mod sweep;

pub use config::{Mode, ScenarioConfig, ScenarioSection};
pub use plots::emit_plots;
pub use reference::{circle_reference, hover_reference, Circle, ReferencePoint};
pub use sweep::{
    default_grid, format_summary_table, run_stem, run_sweep, write_run, write_summary_csv, HarnessError, SweepCell,
    SUMMARY_COLUMNS, SWEEP_DROP_HEIGHTS, SWEEP_PAYLOAD_MASSES,
};
