use std::time::Instant;

use nalgebra::{Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::Allocator;
use crate::harness::{ReferencePoint, ScenarioConfig};
use crate::impact::{resolve_impact, ImpactError, ImpactGeometry};
use crate::math::rk4_step;
use crate::nmpc::{extract_commands, NmpcSolver};
use crate::rate_mrac::RateMrac;
use crate::thrust_mrac::ThrustMrac;
use crate::vehicle::{
    actuator_step, effectiveness_matrix, loaded_derivative, nominal_derivative, LoadedParams, RotorState,
    VehicleState,
};
use crate::ConfigError;

use super::noise::sense;
use super::trace::{mae_position, mae_velocity, TraceRecord};

/// Position norm beyond which a run counts as diverged (m).
pub const DIVERGENCE_RADIUS: f64 = 100.0;

/// Commands produced by one pass through the control cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPipelineOutput {
    pub thrust_cmd: f64,
    pub omega_cmd: Vector3<f64>,
    pub thrust_adapt: f64,
    pub torque_adapt: Vector3<f64>,
    pub u: Vector4<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("impact could not be resolved: {0}")]
    Impact(#[from] ImpactError),
}

/// Result of one scenario run. A diverged run keeps the trace up to the
/// last finite step.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: Vec<TraceRecord>,
    pub failed: bool,
    /// Impact impulse magnitude (N·s), zero when no payload drops.
    pub impulse: f64,
    /// Control ticks on which the NMPC solve failed and the previous command was held.
    pub nmpc_failures: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub payload_mass: f64,
    pub drop_height: f64,
    pub mae_v_cm_s: f64,
    pub mae_p_cm: f64,
    pub failed: bool,
    pub impulse_ns: f64,
    pub nmpc_failures: usize,
    pub runtime_s: f64,
}

impl SimOutcome {
    pub fn summary(&self, cfg: &ScenarioConfig) -> RunSummary {
        RunSummary {
            mode: cfg.scenario.mode.label().to_string(),
            payload_mass: cfg.scenario.payload_mass,
            drop_height: cfg.scenario.drop_height,
            mae_v_cm_s: mae_velocity(&self.trace),
            mae_p_cm: mae_position(&self.trace),
            failed: self.failed,
            impulse_ns: self.impulse,
            nmpc_failures: self.nmpc_failures,
            runtime_s: self.runtime_s,
        }
    }
}

/// The control cascade with its internal states.
#[derive(Debug, Clone)]
pub struct Controller {
    pub nmpc: NmpcSolver,
    pub thrust: ThrustMrac,
    pub rate: RateMrac,
    pub allocator: Allocator,
    pub horizon_dt: f64,
    held: (f64, Vector3<f64>),
    nmpc_failures: usize,
}

impl Controller {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let v = &cfg.vehicle;
        let nmpc_cfg = cfg.effective_nmpc();
        let horizon_dt = nmpc_cfg.dt();
        Self {
            nmpc: NmpcSolver::new(nmpc_cfg, v.clone()),
            thrust: ThrustMrac::new(cfg.thrust_mrac.clone(), v.mass, v.gravity),
            rate: RateMrac::new(cfg.rate_mrac.clone(), cfg.gamma_init()),
            allocator: Allocator::new(
                effectiveness_matrix(v),
                cfg.allocator.clone(),
                v.thrust_min,
                v.thrust_max,
            ),
            horizon_dt,
            held: (v.hover_thrust(), Vector3::zeros()),
            nmpc_failures: 0,
        }
    }

    /// Re-plans from `meas`, holding the previous command if the solve fails.
    pub fn plan(&mut self, meas: &VehicleState, reference: &[ReferencePoint], elapsed: f64) {
        match self.nmpc.tick(meas, reference, elapsed) {
            Ok(sol) => self.held = extract_commands(&sol),
            Err(_) => {
                self.nmpc.reset();
                self.nmpc_failures += 1;
            }
        }
    }

    /// Runs the adaptive loops and allocation on the held NMPC command.
    pub fn inner(&mut self, meas: &VehicleState, dt: f64) -> ControlPipelineOutput {
        let (thrust_cmd, omega_cmd) = self.held;
        let thrust_adapt = self.thrust.update(thrust_cmd, &meas.q, &meas.v, dt);
        let torque_adapt = self.rate.update(&omega_cmd, &meas.omega, dt);
        let wrench = Vector4::new(thrust_adapt, torque_adapt.x, torque_adapt.y, torque_adapt.z);
        let u = match self.allocator.allocate(&wrench) {
            Ok(u) => u,
            // a non-finite wrench only arises from a diverging state
            Err(_) => Vector4::repeat(f64::NAN),
        };
        ControlPipelineOutput {
            thrust_cmd,
            omega_cmd,
            thrust_adapt,
            torque_adapt,
            u,
        }
    }
}

fn reference_horizon(cfg: &ScenarioConfig, t: f64, dt: f64, steps: usize) -> Vec<ReferencePoint> {
    (0..=steps).map(|k| cfg.reference(t + k as f64 * dt)).collect()
}

/// Runs one scenario. Deterministic for a fixed configuration.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    let started = Instant::now();
    let s = &cfg.scenario;
    let params = &cfg.vehicle;
    let dt = s.dt;
    let steps = (s.duration / dt).round() as usize;
    let mrac_every = (1.0 / (s.mrac_rate * dt)).round() as usize;
    let nmpc_every = (1.0 / (s.nmpc_rate * dt)).round() as usize;
    let impact_step = (s.impact_time / dt).round() as usize;
    let drops = s.payload_mass > 0.0;
    let g = effectiveness_matrix(params);
    let loaded = LoadedParams::new(params.clone(), s.payload_mass.max(f64::MIN_POSITIVE), cfg.impact_point());

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(cfg.stream_id());

    let r0 = cfg.reference(0.0);
    let mut x = VehicleState {
        p: r0.p,
        v: r0.v,
        ..VehicleState::default()
    };
    let mut rotors = RotorState {
        f: Vector4::repeat(params.hover_thrust() / 4.0),
    };
    let mut controller = Controller::new(cfg);
    let mut attached = false;
    let mut impulse = 0.0;
    let mut failed = false;
    let mut trace = Vec::with_capacity(steps + 1);
    let mut meas = x;
    let mut out = ControlPipelineOutput {
        thrust_cmd: params.hover_thrust(),
        omega_cmd: Vector3::zeros(),
        thrust_adapt: params.hover_thrust(),
        torque_adapt: Vector3::zeros(),
        u: rotors.f,
    };

    for i in 0..=steps {
        let t = i as f64 * dt;
        if drops && i == impact_step {
            let geom = ImpactGeometry::top_drop(s.payload_mass, s.drop_height, cfg.impact_point(), params.gravity);
            let o = resolve_impact(&x, &geom, params)?;
            x = o.state;
            impulse = o.impulse;
            attached = true;
        }
        if i % mrac_every == 0 {
            meas = sense(&x, &cfg.noise, &mut rng);
            if i % nmpc_every == 0 {
                let h = reference_horizon(cfg, t, controller.horizon_dt, controller.nmpc.cfg.steps);
                controller.plan(&meas, &h, nmpc_every as f64 * dt);
            }
            out = controller.inner(&meas, mrac_every as f64 * dt);
        }
        let r = cfg.reference(t);
        trace.push(TraceRecord {
            t,
            state: x,
            measured: meas,
            rotors: rotors.f,
            thrust_cmd: out.thrust_cmd,
            omega_cmd: out.omega_cmd,
            thrust_adapt: out.thrust_adapt,
            torque_adapt: out.torque_adapt,
            u: out.u,
            k_t: controller.thrust.state.k_t,
            gamma: controller.rate.state.gamma,
            p_ref: r.p,
            v_ref: r.v,
        });
        if i == steps {
            break;
        }

        let w = g * rotors.f;
        let torque = Vector3::new(w[1], w[2], w[3]);
        let next = if attached {
            rk4_step(|s| loaded_derivative(s, w[0], &torque, &loaded), &x.to_vector(), dt)
        } else {
            rk4_step(|s| nominal_derivative(s, w[0], &torque, params), &x.to_vector(), dt)
        };
        let next = next.ok().map(|v| VehicleState::from_vector(&v).normalized());
        match next {
            Some(n) if n.is_finite() && n.p.norm() <= DIVERGENCE_RADIUS => x = n,
            _ => {
                failed = true;
                break;
            }
        }
        rotors = actuator_step(&rotors, &out.u, dt, params.actuator_time_constant);
    }

    Ok(SimOutcome {
        trace,
        failed,
        impulse,
        nmpc_failures: controller.nmpc_failures,
        runtime_s: started.elapsed().as_secs_f64(),
    })
}
