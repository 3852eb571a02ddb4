//! Fixed-step closed-loop simulation with multi-rate control, the payload
//! impact event and measurement noise.

mod engine;
mod noise;
mod trace;

pub use engine::{run_scenario, ControlPipelineOutput, Controller, RunSummary, SimError, SimOutcome, DIVERGENCE_RADIUS};
pub use noise::{sense, NoiseConfig};
pub use trace::{
    mae_position, mae_velocity, read_trace_csv, settling_time, trace_header, write_trace_csv, TraceReadError,
    TraceRecord,
};
