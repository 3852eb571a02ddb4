//! Thrust-scaling MRAC. The NMPC thrust command is multiplied by an adapted
//! gain `k_t` so that the vehicle's vertical response matches a reference
//! model built on the nominal mass, whatever mass is actually attached.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::math::Quaternion;
use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThrustGains {
    /// Observer gain `L_t` diagonal (1/s).
    pub observer: [f64; 3],
    /// Adaptation rate `Γ_t`.
    pub adaptation_rate: f64,
    pub k_min: f64,
    pub k_max: f64,
}

impl Default for ThrustGains {
    fn default() -> Self {
        Self {
            observer: [5.0; 3],
            adaptation_rate: 0.1,
            k_min: 0.5,
            k_max: 3.0,
        }
    }
}

impl ThrustGains {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.observer.iter().any(|l| !(*l > 0.0)) || !(self.adaptation_rate > 0.0) {
            return Err(ConfigError::Invalid("thrust_mrac gains must be positive".into()));
        }
        if !(self.k_min > 0.0 && self.k_min < self.k_max) {
            return Err(ConfigError::Invalid("thrust_mrac needs 0 < k_min < k_max".into()));
        }
        Ok(())
    }

    fn observer_matrix(&self) -> Vector3<f64> {
        Vector3::from(self.observer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustAdaptState {
    pub k_t: f64,
    /// Reference-model velocity; `None` until the first update after a reset.
    pub v_m: Option<Vector3<f64>>,
}

impl Default for ThrustAdaptState {
    fn default() -> Self {
        Self { k_t: 1.0, v_m: None }
    }
}

/// Time derivatives `(v̇_m, k̇_t)` of the adaptive law for a given velocity error.
pub fn thrust_rates(
    thrust_cmd: f64,
    z_body: &Vector3<f64>,
    e_v: &Vector3<f64>,
    gains: &ThrustGains,
    nominal_mass: f64,
    gravity: f64,
) -> (Vector3<f64>, f64) {
    let t_d = z_body * thrust_cmd;
    let v_m_dot = t_d / nominal_mass - Vector3::z() * gravity + gains.observer_matrix().component_mul(e_v);
    let k_dot = -gains.adaptation_rate * e_v.dot(&t_d);
    (v_m_dot, k_dot)
}

/// Lyapunov function of the thrust channel for a plant of mass `total_mass`.
pub fn thrust_lyapunov(
    e_v: &Vector3<f64>,
    k_t: f64,
    gains: &ThrustGains,
    nominal_mass: f64,
    total_mass: f64,
) -> f64 {
    let b = 1.0 / total_mass;
    let k_star = total_mass / nominal_mass;
    0.5 * e_v.norm_squared() + b / (2.0 * gains.adaptation_rate) * (k_t - k_star).powi(2)
}

#[derive(Debug, Clone)]
pub struct ThrustMrac {
    pub gains: ThrustGains,
    pub nominal_mass: f64,
    pub gravity: f64,
    pub state: ThrustAdaptState,
}

impl ThrustMrac {
    pub fn new(gains: ThrustGains, nominal_mass: f64, gravity: f64) -> Self {
        Self {
            gains,
            nominal_mass,
            gravity,
            state: ThrustAdaptState::default(),
        }
    }

    /// Returns `T_a` from the current gain, then advances `v_m` and `k_t` by `dt`.
    pub fn update(&mut self, thrust_cmd: f64, q: &Quaternion, v_meas: &Vector3<f64>, dt: f64) -> f64 {
        let v_m = *self.state.v_m.get_or_insert(*v_meas);
        let thrust = self.state.k_t * thrust_cmd;
        let e_v = v_meas - v_m;
        let (v_m_dot, k_dot) = thrust_rates(
            thrust_cmd,
            &q.body_z(),
            &e_v,
            &self.gains,
            self.nominal_mass,
            self.gravity,
        );
        self.state.v_m = Some(v_m + v_m_dot * dt);
        self.state.k_t = (self.state.k_t + k_dot * dt).clamp(self.gains.k_min, self.gains.k_max);
        thrust
    }

    pub fn reset(&mut self) {
        self.state = ThrustAdaptState::default();
    }

    pub fn velocity_error(&self, v_meas: &Vector3<f64>) -> Vector3<f64> {
        self.state.v_m.map_or(Vector3::zeros(), |v_m| v_meas - v_m)
    }
}
