//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, SVector, Vector3, Vector4};
use rand::Rng;

use quadsim::harness::ReferencePoint;
use quadsim::impact::{ImpactError, ImpactGeometry};
use quadsim::math::{rk4_step, Quaternion};
use quadsim::rate_mrac::{pack_gamma, rate_law, rate_lyapunov, Gamma, RateGains};
use quadsim::thrust_mrac::{thrust_lyapunov, thrust_rates, ThrustGains};
use quadsim::{VehicleParams, VehicleState};

/// Global minimizer of a convex box QP by enumerating all 3ⁿ assignments of
/// each variable to free, lower or upper, solving the free subsystem and
/// keeping the best feasible candidate.
pub fn enumerate_box_qp(h: &DMatrix<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut u = DVector::zeros(n);
        let mut free = Vec::new();
        let mut c = code;
        for i in 0..n {
            match c % 3 {
                0 => free.push(i),
                1 => u[i] = lo[i],
                _ => u[i] = hi[i],
            }
            c /= 3;
        }
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let i = free[a];
                -(g[i] + (0..n).filter(|j| !free.contains(j)).map(|j| h[(i, j)] * u[j]).sum::<f64>())
            });
            let Some(sol) = hff.lu().solve(&rhs) else { continue };
            for (a, &i) in free.iter().enumerate() {
                u[i] = sol[a];
            }
        }
        if (0..n).any(|i| u[i] < lo[i] - 1e-12 || u[i] > hi[i] + 1e-12) {
            continue;
        }
        let f = 0.5 * u.dot(&(h * &u)) + g.dot(&u);
        if best.as_ref().map_or(true, |(fb, _)| f < *fb) {
            best = Some((f, u));
        }
    }
    best.expect("box is non-empty").1
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

pub fn random_unit_quat<R: Rng>(rng: &mut R) -> Quaternion {
    let axis = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    Quaternion::from_axis_angle(&(axis + Vector3::new(0.0, 0.0, 1e-6)), rng.gen_range(-3.0..3.0))
}

/// Random symmetric positive definite 3×3 inertia around a small airframe.
pub fn random_inertia<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.gen_range(-0.1..0.1));
    a * a.transpose() + Matrix3::from_diagonal(&Vector3::from_fn(|_, _| rng.gen_range(0.01..0.1)))
}

pub struct ThrustRun {
    pub lyapunov: Vec<f64>,
    pub error_norm: Vec<f64>,
    pub k_t: f64,
    pub dt: f64,
}

/// Thrust channel joined with a level plant of mass `m + m_P` under a
/// constant hover command, integrated as one ODE with RK4.
/// State: `[v (3), v_m (3), k_t]`.
pub fn thrust_closed_loop(payload_mass: f64, duration: f64, dt: f64) -> ThrustRun {
    let gains = ThrustGains::default();
    let m = 1.0;
    let g = 9.81;
    let total = m + payload_mass;
    let t_d = m * g;
    let z = Vector3::z();
    let f = |s: &SVector<f64, 7>| {
        let v = s.fixed_rows::<3>(0).into_owned();
        let v_m = s.fixed_rows::<3>(3).into_owned();
        let k = s[6];
        let (v_m_dot, k_dot) = thrust_rates(t_d, &z, &(v - v_m), &gains, m, g);
        let v_dot = z * (k * t_d / total) - z * g;
        let mut d = SVector::<f64, 7>::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&v_dot);
        d.fixed_rows_mut::<3>(3).copy_from(&v_m_dot);
        d[6] = k_dot;
        d
    };
    let mut s = SVector::<f64, 7>::zeros();
    s[6] = 1.0;
    let lyap = |s: &SVector<f64, 7>| {
        let e = s.fixed_rows::<3>(0) - s.fixed_rows::<3>(3);
        (thrust_lyapunov(&e, s[6], &gains, m, total), e.norm())
    };
    let steps = (duration / dt).round() as usize;
    let mut run = ThrustRun { lyapunov: Vec::with_capacity(steps + 1), error_norm: Vec::new(), k_t: 1.0, dt };
    for i in 0..=steps {
        let (v, e) = lyap(&s);
        run.lyapunov.push(v);
        run.error_norm.push(e);
        if i < steps {
            s = rk4_step(f, &s, dt).unwrap();
        }
    }
    run.k_t = s[6];
    run
}

pub struct RateRun {
    pub lyapunov: Vec<f64>,
    pub error_norm: Vec<f64>,
    pub dt: f64,
}

/// Rate channel with zero leakage joined with `J_S ω̇ = τ + τ_CoM`, integrated
/// as one ODE with RK4. The adaptive estimate starts from `gamma_init`.
/// State: `[ω (3), ω_m (3), γ (8)]`.
pub fn rate_closed_loop(
    inertia: Matrix3<f64>,
    com_torque: Vector3<f64>,
    gamma_init: Gamma,
    omega_d: Vector3<f64>,
    duration: f64,
    dt: f64,
) -> RateRun {
    let gains = RateGains { leakage: [0.0; 8], ..RateGains::default() };
    let j_inv = inertia.try_inverse().unwrap();
    let gamma_star = pack_gamma(&inertia, &com_torque);
    let f = |s: &SVector<f64, 14>| {
        let w = s.fixed_rows::<3>(0).into_owned();
        let w_m = s.fixed_rows::<3>(3).into_owned();
        let gamma: Gamma = s.fixed_rows::<8>(6).into_owned();
        let (tau, w_m_dot, gamma_dot) = rate_law(&omega_d, &w, &w_m, &gamma, &gains);
        let mut d = SVector::<f64, 14>::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&(j_inv * (tau + com_torque)));
        d.fixed_rows_mut::<3>(3).copy_from(&w_m_dot);
        d.fixed_rows_mut::<8>(6).copy_from(&gamma_dot);
        d
    };
    let mut s = SVector::<f64, 14>::zeros();
    s.fixed_rows_mut::<8>(6).copy_from(&gamma_init);
    let steps = (duration / dt).round() as usize;
    let mut run = RateRun { lyapunov: Vec::with_capacity(steps + 1), error_norm: Vec::new(), dt };
    for i in 0..=steps {
        let e = s.fixed_rows::<3>(0) - s.fixed_rows::<3>(3);
        let gamma: Gamma = s.fixed_rows::<8>(6).into_owned();
        run.lyapunov.push(rate_lyapunov(&e, &gamma, &gamma_star, &inertia, &gains));
        run.error_norm.push(e.norm());
        if i < steps {
            s = rk4_step(f, &s, dt).unwrap();
        }
    }
    run
}

/// Largest step-to-step increase of a sampled Lyapunov function.
pub fn max_increase(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Value of `series` at time `t` for samples spaced `dt`.
pub fn at_time(series: &[f64], dt: f64, t: f64) -> f64 {
    series[((t / dt).round() as usize).min(series.len() - 1)]
}

/// Torque-free spin integrated with RK4 on the raw quaternion, compared
/// with the analytic `q(t) = q0 ⊗ exp(ω t)`.
pub fn spin_error(dt: f64, t_end: f64) -> f64 {
    let omega = Vector3::new(1.3, -0.7, 2.1);
    let f = |s: &Vector4<f64>| (Quaternion::from_vector4(s) * Quaternion::pure(&omega)).to_vector4() * 0.5;
    let q0 = Quaternion::from_axis_angle(&Vector3::new(0.2, 1.0, -0.4), 0.8);
    let mut x = q0.to_vector4();
    for _ in 0..(t_end / dt).round() as usize {
        x = rk4_step(f, &x, dt).unwrap();
    }
    (x - (q0 * Quaternion::exp_map(&(omega * t_end))).to_vector4()).norm()
}

pub fn hover_horizon(p: Vector3<f64>, params: &VehicleParams, steps: usize) -> Vec<ReferencePoint> {
    vec![ReferencePoint::hover(p, params); steps + 1]
}

/// Random state near hover at `p`: up to 0.5 m, 0.5 m/s, 0.3 rad and 1 rad/s
/// per axis, all multiplied by `scale`.
pub fn perturbed_hover<R: Rng>(rng: &mut R, p: Vector3<f64>, scale: f64) -> VehicleState {
    let mut sym = |a: f64| Vector3::from_fn(|_, _| rng.gen_range(-a * scale..a * scale));
    let dp = sym(0.5);
    let v = sym(0.5);
    let tilt = sym(0.3);
    let omega = sym(1.0);
    VehicleState { p: p + dp, q: Quaternion::exp_map(&tilt), v, omega }
}

/// A random airborne state and a payload drop that actually hits it.
pub fn random_impact<R: Rng>(rng: &mut R, params: &VehicleParams) -> (VehicleState, ImpactGeometry) {
    loop {
        let x = VehicleState {
            p: Vector3::zeros(),
            q: Quaternion::exp_map(&Vector3::from_fn(|_, _| rng.gen_range(-0.5..0.5))),
            v: Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0)),
            omega: Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
        };
        let r = Vector3::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25), rng.gen_range(-0.05..0.05));
        let geom = ImpactGeometry::top_drop(rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0), r, params.gravity);
        match quadsim::impact::impulse_magnitude(&x, &geom, params) {
            Ok(_) => return (x, geom),
            Err(ImpactError::Separating(_)) => continue,
            Err(e) => panic!("{e}"),
        }
    }
}

/// Kinetic energy of vehicle and payload (J).
pub fn kinetic_energy(x: &VehicleState, payload_velocity: &Vector3<f64>, payload_mass: f64, params: &VehicleParams) -> f64 {
    let j = params.inertia_matrix();
    0.5 * params.mass * x.v.norm_squared()
        + 0.5 * x.omega.dot(&(j * x.omega))
        + 0.5 * payload_mass * payload_velocity.norm_squared()
}
