use nalgebra::{Vector3, Vector4};

use crate::math::Quaternion;
use crate::vehicle::VehicleParams;

/// Reference state and input for one NMPC stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub q: Quaternion,
    pub omega: Vector3<f64>,
    /// Input reference `[T, ω_c]`.
    pub c: Vector4<f64>,
}

impl ReferencePoint {
    /// Level hover at `p` with the hover thrust as feedforward.
    pub fn hover(p: Vector3<f64>, params: &VehicleParams) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            q: Quaternion::identity(),
            omega: Vector3::zeros(),
            c: Vector4::new(params.hover_thrust(), 0.0, 0.0, 0.0),
        }
    }
}

/// Circle in the horizontal plane, traversed counter-clockwise from angle 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub radius: f64,
    pub speed: f64,
    pub altitude: f64,
}

impl Default for Circle {
    fn default() -> Self {
        Self {
            radius: 2.0,
            speed: 1.5,
            altitude: 1.0,
        }
    }
}

impl Circle {
    pub fn angular_rate(&self) -> f64 {
        self.speed / self.radius
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.angular_rate()
    }

    /// Distance of `p` from the circle, measured in the horizontal plane.
    pub fn radial_error(&self, p: &Vector3<f64>) -> f64 {
        (p.xy().norm() - self.radius).abs()
    }
}

/// Hover at `origin` for all time.
pub fn hover_reference(_t: f64, origin: &Vector3<f64>, params: &VehicleParams) -> ReferencePoint {
    ReferencePoint::hover(*origin, params)
}

/// Point on `circle` at time `t`, level attitude, thrust feedforward for the
/// centripetal acceleration.
pub fn circle_reference(t: f64, circle: &Circle, params: &VehicleParams) -> ReferencePoint {
    let w = circle.angular_rate();
    let r = circle.radius;
    let (s, c) = (w * t).sin_cos();
    let accel = Vector3::new(-r * w * w * c, -r * w * w * s, 0.0);
    ReferencePoint {
        p: Vector3::new(r * c, r * s, circle.altitude),
        v: Vector3::new(-r * w * s, r * w * c, 0.0),
        q: Quaternion::identity(),
        omega: Vector3::zeros(),
        c: Vector4::new(params.mass * (accel - params.gravity_vector()).norm(), 0.0, 0.0, 0.0),
    }
}
