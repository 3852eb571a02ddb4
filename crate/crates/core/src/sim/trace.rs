use std::io::{Read, Write};

use nalgebra::{Vector3, Vector4};

use crate::math::Quaternion;
use crate::rate_mrac::Gamma;
use crate::vehicle::VehicleState;

/// One logged simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub state: VehicleState,
    pub measured: VehicleState,
    /// Realized rotor thrusts (N).
    pub rotors: Vector4<f64>,
    pub thrust_cmd: f64,
    pub omega_cmd: Vector3<f64>,
    pub thrust_adapt: f64,
    pub torque_adapt: Vector3<f64>,
    /// Rotor thrust commands (N).
    pub u: Vector4<f64>,
    pub k_t: f64,
    pub gamma: Gamma,
    pub p_ref: Vector3<f64>,
    pub v_ref: Vector3<f64>,
}

const STATE_NAMES: [&str; 13] = [
    "px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz",
];

/// Column names in file order.
pub fn trace_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    h.extend(STATE_NAMES.iter().map(|s| format!("meas_{s}")));
    h.extend((1..=4).map(|i| format!("f{i}")));
    h.push("T_d".into());
    h.extend(["wd_x", "wd_y", "wd_z"].map(String::from));
    h.push("T_a".into());
    h.extend(["tau_x", "tau_y", "tau_z"].map(String::from));
    h.extend((1..=4).map(|i| format!("u{i}")));
    h.push("k_t".into());
    h.extend((1..=8).map(|i| format!("gamma{i}")));
    h.extend(["pref_x", "pref_y", "pref_z", "vref_x", "vref_y", "vref_z"].map(String::from));
    h
}

impl TraceRecord {
    pub fn to_row(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(66);
        r.push(self.t);
        r.extend(self.state.to_vector().iter());
        r.extend(self.measured.to_vector().iter());
        r.extend(self.rotors.iter());
        r.push(self.thrust_cmd);
        r.extend(self.omega_cmd.iter());
        r.push(self.thrust_adapt);
        r.extend(self.torque_adapt.iter());
        r.extend(self.u.iter());
        r.push(self.k_t);
        r.extend(self.gamma.iter());
        r.extend(self.p_ref.iter());
        r.extend(self.v_ref.iter());
        r
    }

    pub fn from_row(row: &[f64]) -> Option<Self> {
        if row.len() != trace_header().len() {
            return None;
        }
        let v3 = |i: usize| Vector3::new(row[i], row[i + 1], row[i + 2]);
        let v4 = |i: usize| Vector4::new(row[i], row[i + 1], row[i + 2], row[i + 3]);
        let state = |i: usize| VehicleState {
            p: v3(i),
            q: Quaternion::new(row[i + 3], row[i + 4], row[i + 5], row[i + 6]),
            v: v3(i + 7),
            omega: v3(i + 10),
        };
        Some(Self {
            t: row[0],
            state: state(1),
            measured: state(14),
            rotors: v4(27),
            thrust_cmd: row[31],
            omega_cmd: v3(32),
            thrust_adapt: row[35],
            torque_adapt: v3(36),
            u: v4(39),
            k_t: row[43],
            gamma: Gamma::from_column_slice(&row[44..52]),
            p_ref: v3(52),
            v_ref: v3(55),
        })
    }
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header())?;
    for rec in trace {
        // `{}` on f64 prints the shortest representation that round-trips
        w.write_record(rec.to_row().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("trace header does not match the expected columns")]
    Header,
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceReadError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != trace_header() {
        return Err(TraceReadError::Header);
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TraceReadError::Row { row: i + 1, msg: e.to_string() })?;
        out.push(TraceRecord::from_row(&vals).ok_or(TraceReadError::Row {
            row: i + 1,
            msg: "wrong number of columns".into(),
        })?);
    }
    Ok(out)
}

/// Mean velocity tracking error norm over the trace, cm/s.
pub fn mae_velocity(trace: &[TraceRecord]) -> f64 {
    mean(trace.iter().map(|r| (r.state.v - r.v_ref).norm())) * 100.0
}

/// Mean position tracking error norm over the trace, cm.
pub fn mae_position(trace: &[TraceRecord]) -> f64 {
    mean(trace.iter().map(|r| (r.state.p - r.p_ref).norm())) * 100.0
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// First time at or after `from` after which `metric` stays below
/// `threshold` for the rest of the trace.
pub fn settling_time(
    trace: &[TraceRecord],
    from: f64,
    threshold: f64,
    metric: impl Fn(&TraceRecord) -> f64,
) -> Option<f64> {
    let mut settled = None;
    for r in trace.iter().filter(|r| r.t >= from) {
        if metric(r) < threshold {
            settled.get_or_insert(r.t);
        } else {
            settled = None;
        }
    }
    settled
}
