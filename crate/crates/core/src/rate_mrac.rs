//! MIMO angular-rate MRAC. Adapts the system inertia and the two horizontal
//! components of the center-of-mass gravity torque, packed as
//! `γ = [J11, J22, J33, J12, J23, J13, τ1, τ2]`.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

pub type Gamma = SMatrix<f64, 8, 1>;

/// `φ_ω`, 8×3; its transpose maps `γ` to a body torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorMatrix(pub SMatrix<f64, 8, 3>);

impl RegressorMatrix {
    /// `φ_ωᵀ γ`.
    pub fn apply(&self, gamma: &Gamma) -> Vector3<f64> {
        self.0.tr_mul(gamma)
    }
}

pub fn build_regressor(phi: &Vector3<f64>) -> RegressorMatrix {
    let (a, b, c) = (phi.x, phi.y, phi.z);
    #[rustfmt::skip]
    let t = SMatrix::<f64, 3, 8>::from_row_slice(&[
        a,   0.0, 0.0, b,   0.0, c,   1.0, 0.0,
        0.0, b,   0.0, a,   c,   0.0, 0.0, 1.0,
        0.0, 0.0, c,   0.0, b,   a,   0.0, 0.0,
    ]);
    RegressorMatrix(t.transpose())
}

/// Packs a symmetric inertia and the horizontal torque components into `γ`.
pub fn pack_gamma(inertia: &Matrix3<f64>, torque: &Vector3<f64>) -> Gamma {
    Gamma::from_column_slice(&[
        inertia[(0, 0)],
        inertia[(1, 1)],
        inertia[(2, 2)],
        inertia[(0, 1)],
        inertia[(1, 2)],
        inertia[(0, 2)],
        torque.x,
        torque.y,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateGains {
    /// Reference-model gain `K_ω` diagonal (1/s).
    pub reference: [f64; 3],
    /// Observer gain `L_ω` diagonal (1/s).
    pub observer: [f64; 3],
    /// Proportional gain `K_p` diagonal (N·m·s).
    pub proportional: [f64; 3],
    /// Adaptation rates `Γ_ω` diagonal.
    pub adaptation_rate: [f64; 8],
    /// e-modification coefficients.
    pub leakage: [f64; 8],
}

impl Default for RateGains {
    fn default() -> Self {
        Self {
            reference: [16.7; 3],
            observer: [50.0; 3],
            proportional: [0.2, 0.2, 0.3],
            adaptation_rate: [1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 10.0, 10.0],
            leakage: [0.05; 8],
        }
    }
}

impl RateGains {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = self
            .reference
            .iter()
            .chain(&self.observer)
            .chain(&self.proportional)
            .chain(&self.adaptation_rate)
            .all(|g| *g > 0.0);
        if !positive || self.leakage.iter().any(|m| !(*m >= 0.0)) {
            return Err(ConfigError::Invalid(
                "rate_mrac gains must be positive and leakage non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Slowest reference-model pole, `min diag(K_ω)`.
    pub fn slowest_reference_pole(&self) -> f64 {
        self.reference.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateAdaptState {
    pub gamma: Gamma,
    /// Reference-model rate; `None` until the first update after a reset.
    pub omega_m: Option<Vector3<f64>>,
}

/// Time derivatives `(ω̇_m, γ̇)` and the commanded torque for given errors.
pub fn rate_law(
    omega_d: &Vector3<f64>,
    omega: &Vector3<f64>,
    omega_m: &Vector3<f64>,
    gamma: &Gamma,
    gains: &RateGains,
) -> (Vector3<f64>, Vector3<f64>, Gamma) {
    let k = Vector3::from(gains.reference);
    let l = Vector3::from(gains.observer);
    let kp = Vector3::from(gains.proportional);
    let e = omega - omega_m;
    let phi = k.component_mul(&(omega - omega_d));
    let reg = build_regressor(&phi);
    let torque = -reg.apply(gamma) - kp.component_mul(&e);
    let e_norm = e.norm();
    let drive = reg.0 * e;
    let gamma_dot = Gamma::from_fn(|i, _| {
        gains.adaptation_rate[i] * drive[i] - gains.leakage[i] * e_norm * gamma[i]
    });
    let omega_m_dot = k.component_mul(&(omega_d - omega_m)) + l.component_mul(&e);
    (torque, omega_m_dot, gamma_dot)
}

/// Lyapunov function of the rate channel against the true parameters.
pub fn rate_lyapunov(
    e_omega: &Vector3<f64>,
    gamma: &Gamma,
    gamma_star: &Gamma,
    system_inertia: &Matrix3<f64>,
    gains: &RateGains,
) -> f64 {
    let d = gamma - gamma_star;
    let param: f64 = (0..8).map(|i| d[i] * d[i] / gains.adaptation_rate[i]).sum();
    0.5 * e_omega.dot(&(system_inertia * e_omega)) + 0.5 * param
}

#[derive(Debug, Clone)]
pub struct RateMrac {
    pub gains: RateGains,
    pub state: RateAdaptState,
}

impl RateMrac {
    /// Controller initialized with `γ` set to `gamma_init`.
    pub fn new(gains: RateGains, gamma_init: Gamma) -> Self {
        Self {
            gains,
            state: RateAdaptState {
                gamma: gamma_init,
                omega_m: None,
            },
        }
    }

    /// Returns `τ_a` from the current estimate, then advances `ω_m` and `γ` by `dt`.
    pub fn update(&mut self, omega_d: &Vector3<f64>, omega_meas: &Vector3<f64>, dt: f64) -> Vector3<f64> {
        let omega_m = *self.state.omega_m.get_or_insert(*omega_meas);
        let (torque, omega_m_dot, gamma_dot) =
            rate_law(omega_d, omega_meas, &omega_m, &self.state.gamma, &self.gains);
        self.state.omega_m = Some(omega_m + omega_m_dot * dt);
        self.state.gamma += gamma_dot * dt;
        torque
    }

    pub fn reset(&mut self, gamma_init: Gamma) {
        self.state = RateAdaptState {
            gamma: gamma_init,
            omega_m: None,
        };
    }

    pub fn rate_error(&self, omega_meas: &Vector3<f64>) -> Vector3<f64> {
        self.state.omega_m.map_or(Vector3::zeros(), |m| omega_meas - m)
    }
}
