//! Rigid-body quadrotor model: parameters, control effectiveness, nominal and
//! payload-loaded dynamics, rotor lag.

use nalgebra::{Matrix3, Matrix4, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::math::Quaternion;
use crate::ConfigError;

/// Flat state layout `[p(3), q(4), v(3), ω(3)]`.
pub type StateVector = SVector<f64, 13>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Row-major inertia about the geometric center, kg·m².
    pub inertia: [[f64; 3]; 3],
    /// Rotor distance from the body x axis (m).
    pub arm_x: f64,
    /// Rotor distance from the body y axis (m).
    pub arm_y: f64,
    /// Rotor drag-torque constant (m).
    pub drag_torque: f64,
    /// First-order rotor lag (s).
    pub actuator_time_constant: f64,
    /// Per-rotor thrust bounds (N).
    pub thrust_min: f64,
    pub thrust_max: f64,
    /// m/s²
    pub gravity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: [[0.05, 0.0, 0.0], [0.0, 0.05, 0.0], [0.0, 0.0, 0.09]],
            arm_x: 0.2,
            arm_y: 0.2,
            drag_torque: 0.013,
            actuator_time_constant: 0.02,
            thrust_min: 0.0,
            thrust_max: 15.0,
            gravity: 9.81,
        }
    }
}

impl VehicleParams {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        let j = &self.inertia;
        Matrix3::new(
            j[0][0], j[0][1], j[0][2], j[1][0], j[1][1], j[1][2], j[2][0], j[2][1], j[2][2],
        )
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity)
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let j = self.inertia_matrix();
        let checks = [
            (self.mass > 0.0, "vehicle.mass must be positive"),
            (self.arm_x > 0.0 && self.arm_y > 0.0, "vehicle arms must be positive"),
            (self.drag_torque > 0.0, "vehicle.drag_torque must be positive"),
            (self.actuator_time_constant > 0.0, "vehicle.actuator_time_constant must be positive"),
            (
                0.0 <= self.thrust_min && self.thrust_min < self.thrust_max,
                "vehicle thrust bounds must satisfy 0 <= min < max",
            ),
            (self.gravity > 0.0, "vehicle.gravity must be positive"),
            ((j - j.transpose()).amax() <= 1e-12, "vehicle.inertia must be symmetric"),
            (j.cholesky().is_some(), "vehicle.inertia must be positive definite"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ConfigError::Invalid(msg.to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// World-frame position of the geometric center (m).
    pub p: Vector3<f64>,
    /// Body-to-world attitude.
    pub q: Quaternion,
    /// World-frame velocity (m/s).
    pub v: Vector3<f64>,
    /// Body-frame angular rate (rad/s).
    pub omega: Vector3<f64>,
}

impl Default for VehicleState {
    fn default() -> Self {
        Self::at_rest(Vector3::zeros())
    }
}

impl VehicleState {
    pub fn at_rest(p: Vector3<f64>) -> Self {
        Self {
            p,
            q: Quaternion::identity(),
            v: Vector3::zeros(),
            omega: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.p);
        x.fixed_rows_mut::<4>(3).copy_from(&self.q.to_vector4());
        x.fixed_rows_mut::<3>(7).copy_from(&self.v);
        x.fixed_rows_mut::<3>(10).copy_from(&self.omega);
        x
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            p: x.fixed_rows::<3>(0).into_owned(),
            q: Quaternion::new(x[3], x[4], x[5], x[6]),
            v: x.fixed_rows::<3>(7).into_owned(),
            omega: x.fixed_rows::<3>(10).into_owned(),
        }
    }

    /// Same state with the attitude projected back onto the unit sphere.
    pub fn normalized(mut self) -> Self {
        self.q = self.q.normalize();
        self
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Realized per-rotor thrusts (N).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotorState {
    pub f: Vector4<f64>,
}

/// Vehicle with a payload rigidly attached in the body x-y plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedParams {
    pub base: VehicleParams,
    pub payload_mass: f64,
    /// Payload position in the body frame (m).
    pub payload_position: Vector3<f64>,
    /// Inertia of vehicle plus payload about the geometric center.
    pub system_inertia: Matrix3<f64>,
    /// Center of mass of vehicle plus payload in the body frame.
    pub com_offset: Vector3<f64>,
}

impl LoadedParams {
    pub fn new(base: VehicleParams, payload_mass: f64, payload_position: Vector3<f64>) -> Self {
        let system_inertia = system_inertia(&base, payload_mass, &payload_position);
        let com_offset = payload_position * (payload_mass / (base.mass + payload_mass));
        Self {
            base,
            payload_mass,
            payload_position,
            system_inertia,
            com_offset,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.base.mass + self.payload_mass
    }

    /// Gravity torque at level attitude: `(-r_BM,y, r_BM,x, 0)·(m + m_P)·g`.
    pub fn level_gravity_torque(&self) -> Vector3<f64> {
        Vector3::new(-self.com_offset.y, self.com_offset.x, 0.0) * (self.total_mass() * self.base.gravity)
    }
}

/// Maps rotor thrusts `f` to `[T, τx, τy, τz]`.
///
/// Rotor layout (body frame): 1 at `(+dx, -dy)`, 2 at `(-dx, -dy)`,
/// 3 at `(-dx, +dy)`, 4 at `(+dx, +dy)`; rotors 2 and 4 produce positive yaw
/// drag torque.
pub fn effectiveness_matrix(params: &VehicleParams) -> Matrix4<f64> {
    let (dx, dy, c) = (params.arm_x, params.arm_y, params.drag_torque);
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        -dy, -dy, dy, dy, //
        -dx, dx, dx, -dx, //
        -c, c, -c, c,
    )
}

fn rigid_body_derivative(
    x: &StateVector,
    thrust: f64,
    torque: &Vector3<f64>,
    mass: f64,
    inertia: &Matrix3<f64>,
    gravity: &Vector3<f64>,
) -> StateVector {
    let s = VehicleState::from_vector(x);
    let q_dot = (s.q * Quaternion::pure(&s.omega)).to_vector4() * 0.5;
    let v_dot = s.q.body_z() * (thrust / mass) + gravity;
    let rhs = torque - s.omega.cross(&(inertia * s.omega));
    let omega_dot = inertia
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| Vector3::repeat(f64::NAN));

    let mut d = StateVector::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&s.v);
    d.fixed_rows_mut::<4>(3).copy_from(&q_dot);
    d.fixed_rows_mut::<3>(7).copy_from(&v_dot);
    d.fixed_rows_mut::<3>(10).copy_from(&omega_dot);
    d
}

/// Unloaded rigid-body dynamics driven by collective thrust and body torque.
pub fn nominal_derivative(
    x: &StateVector,
    thrust: f64,
    torque: &Vector3<f64>,
    params: &VehicleParams,
) -> StateVector {
    rigid_body_derivative(
        x,
        thrust,
        torque,
        params.mass,
        &params.inertia_matrix(),
        &params.gravity_vector(),
    )
}

/// Dynamics of the vehicle-payload system about the geometric center,
/// including the attitude-dependent gravity torque from the shifted CoM.
pub fn loaded_derivative(
    x: &StateVector,
    thrust: f64,
    torque: &Vector3<f64>,
    lp: &LoadedParams,
) -> StateVector {
    let q = Quaternion::new(x[3], x[4], x[5], x[6]);
    let total = torque + gravity_torque(&q, lp);
    rigid_body_derivative(
        x,
        thrust,
        &total,
        lp.total_mass(),
        &lp.system_inertia,
        &lp.base.gravity_vector(),
    )
}

/// Body-frame torque of the total weight acting at the shifted center of mass.
pub fn gravity_torque(q: &Quaternion, lp: &LoadedParams) -> Vector3<f64> {
    let weight_world = lp.base.gravity_vector() * lp.total_mass();
    lp.com_offset.cross(&q.inverse_rotate(&weight_world))
}

/// Inertia about the geometric center after adding a point mass at `r`.
pub fn system_inertia(params: &VehicleParams, payload_mass: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    params.inertia_matrix() + (Matrix3::identity() * r.norm_squared() - r * r.transpose()) * payload_mass
}

/// Exact first-order lag update of each rotor toward its command.
pub fn actuator_step(rotors: &RotorState, u: &Vector4<f64>, dt: f64, time_constant: f64) -> RotorState {
    let decay = (-dt / time_constant).exp();
    RotorState {
        f: u + (rotors.f - u) * decay,
    }
}
