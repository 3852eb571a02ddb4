use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::math::quat_exp_map;
use crate::vehicle::VehicleState;
use crate::ConfigError;

/// Standard deviations of the additive measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// m
    pub sigma_p: f64,
    /// m/s
    pub sigma_v: f64,
    /// rad/s
    pub sigma_omega: f64,
    /// rad
    pub sigma_att: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_p: 0.002,
            sigma_v: 0.02,
            sigma_omega: 0.01,
            sigma_att: 0.002,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_p: 0.0,
            sigma_v: 0.0,
            sigma_omega: 0.0,
            sigma_att: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if [self.sigma_p, self.sigma_v, self.sigma_omega, self.sigma_att]
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return Err(ConfigError::Invalid("noise sigmas must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn gaussian3<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Vector3<f64> {
    let n = Normal::new(0.0, sigma).expect("validated sigma");
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Noisy measurement of `x`. Attitude noise is a right-multiplied rotation
/// `exp(η)`, `η ~ N(0, σ_att² I)`.
pub fn sense<R: Rng + ?Sized>(x: &VehicleState, nc: &NoiseConfig, rng: &mut R) -> VehicleState {
    let mut y = *x;
    if nc.sigma_p > 0.0 {
        y.p += gaussian3(nc.sigma_p, rng);
    }
    if nc.sigma_v > 0.0 {
        y.v += gaussian3(nc.sigma_v, rng);
    }
    if nc.sigma_omega > 0.0 {
        y.omega += gaussian3(nc.sigma_omega, rng);
    }
    if nc.sigma_att > 0.0 {
        y.q = (x.q * quat_exp_map(&gaussian3(nc.sigma_att, rng))).normalize();
    }
    y
}
