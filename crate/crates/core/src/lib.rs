//! Quadrotor flight-dynamics simulator with a cascaded adaptive control stack:
//! a nonlinear MPC on top, a thrust-scaling MRAC and a MIMO angular-rate MRAC
//! below it, and QP control allocation down to the four rotors.
//!
//! The simulator reproduces payload-capture experiments: a payload dropped
//! onto the airframe hits it inelastically, then stays attached and shifts
//! the mass, inertia and center of mass of the vehicle.

pub mod allocator;
pub mod impact;
pub mod math;
pub mod nmpc;
pub mod rate_mrac;
pub mod thrust_mrac;
pub mod vehicle;

pub mod harness;
pub mod sim;

pub use math::{BoxQp, MathError, Quaternion};
pub use vehicle::{LoadedParams, RotorState, VehicleParams, VehicleState};

/// Configuration could not be read or failed validation.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("failed to parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
