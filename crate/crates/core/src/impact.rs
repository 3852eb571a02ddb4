//! Perfectly inelastic point impact of a falling payload on the airframe.
//!
//! Contact point and normal live in the body frame; velocities are given in
//! the world frame and rotated into the body frame at the impact instant.

use nalgebra::Vector3;

use crate::vehicle::{VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ImpactError {
    #[error("bodies are separating at the contact (normal approach speed {0:.3e} m/s)")]
    Separating(f64),
    #[error("impact normal must be a unit vector")]
    BadNormal,
    #[error("payload mass must be positive")]
    BadMass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactGeometry {
    /// Contact point in the body frame (m).
    pub contact_point: Vector3<f64>,
    /// Unit impulse direction on the vehicle, body frame, pointing into the airframe.
    pub normal: Vector3<f64>,
    /// kg
    pub payload_mass: f64,
    /// Payload velocity just before contact, world frame (m/s).
    pub payload_velocity: Vector3<f64>,
}

impl ImpactGeometry {
    /// Payload released from rest `drop_height` above the top face, striking it at `contact_point`.
    pub fn top_drop(payload_mass: f64, drop_height: f64, contact_point: Vector3<f64>, gravity: f64) -> Self {
        Self {
            contact_point,
            normal: -Vector3::z(),
            payload_mass,
            payload_velocity: Vector3::new(0.0, 0.0, -drop_speed(drop_height, gravity)),
        }
    }

    fn check(&self) -> Result<(), ImpactError> {
        if (self.normal.norm() - 1.0).abs() > 1e-12 {
            return Err(ImpactError::BadNormal);
        }
        if self.payload_mass <= 0.0 || !self.payload_mass.is_finite() {
            return Err(ImpactError::BadMass);
        }
        Ok(())
    }
}

/// Speed after free fall from rest through `height`.
pub fn drop_speed(height: f64, gravity: f64) -> f64 {
    (2.0 * gravity * height).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactOutcome {
    pub state: VehicleState,
    /// Impulse magnitude (N·s).
    pub impulse: f64,
    /// Payload velocity after the impact, world frame.
    pub payload_velocity: Vector3<f64>,
}

struct BodyFrame {
    v: Vector3<f64>,
    v_payload: Vector3<f64>,
    j_inv_r_cross_n: Vector3<f64>,
}

fn body_frame(x: &VehicleState, geom: &ImpactGeometry, params: &VehicleParams) -> BodyFrame {
    let r_cross_n = geom.contact_point.cross(&geom.normal);
    let j_inv_r_cross_n = params
        .inertia_matrix()
        .cholesky()
        .expect("validated inertia")
        .solve(&r_cross_n);
    BodyFrame {
        v: x.q.inverse_rotate(&x.v),
        v_payload: x.q.inverse_rotate(&geom.payload_velocity),
        j_inv_r_cross_n,
    }
}

/// Effective inverse mass along the normal at the contact point.
pub fn effective_inverse_mass(geom: &ImpactGeometry, params: &VehicleParams) -> f64 {
    let r_cross_n = geom.contact_point.cross(&geom.normal);
    let j_inv = params.inertia_matrix().cholesky().expect("validated inertia").solve(&r_cross_n);
    1.0 / params.mass + 1.0 / geom.payload_mass + j_inv.cross(&geom.contact_point).dot(&geom.normal)
}

/// Magnitude of the contact impulse (N·s), non-negative.
pub fn impulse_magnitude(
    x: &VehicleState,
    geom: &ImpactGeometry,
    params: &VehicleParams,
) -> Result<f64, ImpactError> {
    geom.check()?;
    let b = body_frame(x, geom, params);
    let approach = (b.v_payload - b.v - x.omega.cross(&geom.contact_point)).dot(&geom.normal);
    if approach < 0.0 {
        return Err(ImpactError::Separating(approach));
    }
    Ok(approach / effective_inverse_mass(geom, params))
}

/// Post-impact state, impulse and payload velocity.
pub fn resolve_impact(
    x: &VehicleState,
    geom: &ImpactGeometry,
    params: &VehicleParams,
) -> Result<ImpactOutcome, ImpactError> {
    let impulse = impulse_magnitude(x, geom, params)?;
    let b = body_frame(x, geom, params);
    let v_body = b.v + geom.normal * (impulse / params.mass);
    let v_payload_body = b.v_payload - geom.normal * (impulse / geom.payload_mass);
    let state = VehicleState {
        v: x.q.rotate(&v_body),
        omega: x.omega + b.j_inv_r_cross_n * impulse,
        ..*x
    };
    Ok(ImpactOutcome {
        state,
        impulse,
        payload_velocity: x.q.rotate(&v_payload_body),
    })
}

/// Post-impact vehicle state; position and attitude are unchanged.
pub fn apply_impact(
    x: &VehicleState,
    geom: &ImpactGeometry,
    params: &VehicleParams,
) -> Result<VehicleState, ImpactError> {
    resolve_impact(x, geom, params).map(|o| o.state)
}
