//! Receding-horizon nonlinear MPC on `[p, q, v, ω]`.
//!
//! The rotational dynamics inside the prediction model are replaced by a
//! first-order lag of the body rate toward a commanded rate, so the optimizer
//! never needs the (uncertain) inertia. Inputs are `c = [T, ω_c]`.
//!
//! The optimal control problem is transcribed with RK4 shooting over
//! `δt = H/N`; node states are eliminated by condensing, leaving a problem in
//! the `4N` inputs that is solved with Gauss-Newton SQP. Each SQP step is a
//! box QP, and step acceptance uses an Armijo backtracking line search on the
//! exact objective.

use nalgebra::{DMatrix, DVector, SMatrix, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::harness::ReferencePoint;
use crate::math::{solve_box_qp_with, BoxQp, MathError, QpOptions, Quaternion};
use crate::vehicle::{StateVector, VehicleParams, VehicleState};
use crate::ConfigError;

type Mat13 = SMatrix<f64, 13, 13>;
type Mat13x4 = SMatrix<f64, 13, 4>;

/// Residual rows per intermediate stage: p, v, vec(q_e), ω, c.
const STAGE_ROWS: usize = 16;
/// Residual rows for the terminal stage: p, v, vec(q_e), ω.
const TERMINAL_ROWS: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NmpcError {
    #[error("input bounds are infeasible at index {0} (min > max)")]
    InfeasibleBounds(usize),
    #[error("prediction produced a non-finite state")]
    NonFiniteState,
    #[error("reference has {got} points, expected {expected}")]
    ReferenceLength { expected: usize, got: usize },
    #[error("QP subproblem failed: {0}")]
    Qp(#[from] MathError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcpConfig {
    /// Prediction horizon (s).
    pub horizon: f64,
    pub steps: usize,
    pub q_position: [f64; 3],
    pub q_velocity: [f64; 3],
    pub q_attitude: [f64; 3],
    pub q_rate: [f64; 3],
    /// Input weights on `[T, ω_c]`.
    pub r_input: [f64; 4],
    pub input_min: [f64; 4],
    pub input_max: [f64; 4],
    /// Time constant of the rate-loop surrogate (s).
    pub rate_time_constant: f64,
    /// SQP iteration cap for a full solve.
    pub max_iterations: usize,
    /// SQP iterations per control tick when warm-started (real-time iteration).
    pub tick_iterations: usize,
    /// Projected-gradient stopping tolerance.
    pub tolerance: f64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            steps: 20,
            q_position: [200.0; 3],
            q_velocity: [20.0; 3],
            q_attitude: [150.0; 3],
            q_rate: [1.0; 3],
            r_input: [0.1, 1.0, 1.0, 1.0],
            input_min: [0.0, -6.0, -6.0, -6.0],
            input_max: [60.0, 6.0, 6.0, 6.0],
            rate_time_constant: 0.06,
            max_iterations: 100,
            tick_iterations: 10,
            tolerance: 1e-6,
        }
    }
}

impl OcpConfig {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let weights = self
            .q_position
            .iter()
            .chain(&self.q_velocity)
            .chain(&self.q_attitude)
            .chain(&self.q_rate)
            .chain(&self.r_input);
        if weights.clone().any(|w| !(*w > 0.0)) {
            return Err(ConfigError::Invalid("nmpc weights must be positive".into()));
        }
        if self.steps < 2 || !(self.horizon > 0.0) || !(self.rate_time_constant > 0.0) {
            return Err(ConfigError::Invalid(
                "nmpc needs steps >= 2, horizon > 0, rate_time_constant > 0".into(),
            ));
        }
        if (0..4).any(|i| !(self.input_min[i] < self.input_max[i])) {
            return Err(ConfigError::Invalid("nmpc input_min must be below input_max".into()));
        }
        if self.max_iterations == 0 || self.tick_iterations == 0 {
            return Err(ConfigError::Invalid("nmpc iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OcpSolution {
    /// Predicted states `x_0 … x_N`.
    pub states: Vec<VehicleState>,
    /// Inputs `c_0 … c_{N-1}`, each `[T, ω_c]`.
    pub inputs: Vec<Vector4<f64>>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Objective after every accepted iterate, starting with the initial guess.
    pub cost_history: Vec<f64>,
    /// False when the iteration cap was hit before the tolerance was met.
    pub converged: bool,
}

impl OcpSolution {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().unwrap_or(&f64::NAN)
    }
}

/// Prediction dynamics: translational and attitude kinematics of the rigid
/// body, body rate following `ω_c` with time constant `σ`.
pub fn prediction_derivative(
    x: &StateVector,
    c: &Vector4<f64>,
    cfg: &OcpConfig,
    params: &VehicleParams,
) -> StateVector {
    Model::new(cfg, params).derivative(x, c)
}

#[derive(Debug, Clone, Copy)]
struct Model {
    mass: f64,
    gravity: f64,
    sigma: f64,
}

impl Model {
    fn new(cfg: &OcpConfig, params: &VehicleParams) -> Self {
        Self {
            mass: params.mass,
            gravity: params.gravity,
            sigma: cfg.rate_time_constant,
        }
    }

    fn derivative(&self, x: &StateVector, c: &Vector4<f64>) -> StateVector {
        let q = Quaternion::new(x[3], x[4], x[5], x[6]);
        let omega = Vector3::new(x[10], x[11], x[12]);
        let q_dot = (q * Quaternion::pure(&omega)).to_vector4() * 0.5;
        let v_dot = q.body_z() * (c[0] / self.mass) - Vector3::z() * self.gravity;
        let omega_c = Vector3::new(c[1], c[2], c[3]);
        let omega_dot = (omega_c - omega) / self.sigma;
        let mut d = StateVector::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&x.fixed_rows::<3>(7));
        d.fixed_rows_mut::<4>(3).copy_from(&q_dot);
        d.fixed_rows_mut::<3>(7).copy_from(&v_dot);
        d.fixed_rows_mut::<3>(10).copy_from(&omega_dot);
        d
    }

    fn jacobians(&self, x: &StateVector, c: &Vector4<f64>) -> (Mat13, Mat13x4) {
        let (w, qx, qy, qz) = (x[3], x[4], x[5], x[6]);
        let q = Quaternion::new(w, qx, qy, qz);
        let omega = Vector3::new(x[10], x[11], x[12]);
        let mut a = Mat13::zeros();
        let mut b = Mat13x4::zeros();

        // ṗ = v
        a.fixed_view_mut::<3, 3>(0, 7).fill_with_identity();
        // q̇ = ½ q ⊗ (0, ω)
        let rw = Quaternion::pure(&omega).right_matrix() * 0.5;
        a.fixed_view_mut::<4, 4>(3, 3).copy_from(&rw);
        let lq = q.left_matrix() * 0.5;
        a.fixed_view_mut::<4, 3>(3, 10).copy_from(&lq.fixed_view::<4, 3>(0, 1));
        // v̇ = T z_B(q) / m + g
        let s = c[0] / self.mass;
        #[rustfmt::skip]
        let dz = SMatrix::<f64, 3, 4>::new(
            2.0 * qy, 2.0 * qz, 2.0 * w, 2.0 * qx,
            -2.0 * qx, -2.0 * w, 2.0 * qz, 2.0 * qy,
            0.0, -4.0 * qx, -4.0 * qy, 0.0,
        );
        a.fixed_view_mut::<3, 4>(7, 3).copy_from(&(dz * s));
        b.fixed_view_mut::<3, 1>(7, 0).copy_from(&(q.body_z() / self.mass));
        // ω̇ = (ω_c - ω) / σ
        for i in 0..3 {
            a[(10 + i, 10 + i)] = -1.0 / self.sigma;
            b[(10 + i, 1 + i)] = 1.0 / self.sigma;
        }
        (a, b)
    }

    /// RK4 step followed by quaternion renormalization.
    fn step(&self, x: &StateVector, c: &Vector4<f64>, h: f64) -> StateVector {
        let k1 = self.derivative(x, c);
        let k2 = self.derivative(&(x + k1 * (0.5 * h)), c);
        let k3 = self.derivative(&(x + k2 * (0.5 * h)), c);
        let k4 = self.derivative(&(x + k3 * h), c);
        normalize_attitude(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)))
    }

    /// RK4 step with its exact Jacobians with respect to state and input.
    fn step_with_jacobians(&self, x: &StateVector, c: &Vector4<f64>, h: f64) -> (StateVector, Mat13, Mat13x4) {
        let id = Mat13::identity();
        let k1 = self.derivative(x, c);
        let (a1, b1) = self.jacobians(x, c);
        let x2 = x + k1 * (0.5 * h);
        let k2 = self.derivative(&x2, c);
        let (a2, b2) = self.jacobians(&x2, c);
        let k2x = a2 * (id + a1 * (0.5 * h));
        let k2u = a2 * b1 * (0.5 * h) + b2;
        let x3 = x + k2 * (0.5 * h);
        let k3 = self.derivative(&x3, c);
        let (a3, b3) = self.jacobians(&x3, c);
        let k3x = a3 * (id + k2x * (0.5 * h));
        let k3u = a3 * k2u * (0.5 * h) + b3;
        let x4 = x + k3 * h;
        let k4 = self.derivative(&x4, c);
        let (a4, b4) = self.jacobians(&x4, c);
        let k4x = a4 * (id + k3x * h);
        let k4u = a4 * k3u * h + b4;

        let raw = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let mut ax = id + (a1 + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        let mut bu = (b1 + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);

        // d(q/‖q‖) = (I - q̂q̂ᵀ)/‖q‖ dq
        let q = raw.fixed_rows::<4>(3).into_owned();
        let n = q.norm();
        let qh = q / n;
        let proj = (SMatrix::<f64, 4, 4>::identity() - qh * qh.transpose()) / n;
        let aq = proj * ax.fixed_rows::<4>(3);
        ax.fixed_rows_mut::<4>(3).copy_from(&aq);
        let bq = proj * bu.fixed_rows::<4>(3);
        bu.fixed_rows_mut::<4>(3).copy_from(&bq);

        (normalize_attitude(&raw), ax, bu)
    }
}

fn normalize_attitude(x: &StateVector) -> StateVector {
    let mut y = *x;
    let n = x.fixed_rows::<4>(3).norm();
    for i in 3..7 {
        y[i] /= n;
    }
    y
}

/// Weighted squared tracking error of one stage. `input` is `None` at the
/// terminal stage.
pub fn stage_cost(
    x: &VehicleState,
    x_ref: &ReferencePoint,
    input: Option<(&Vector4<f64>, &Vector4<f64>)>,
    cfg: &OcpConfig,
) -> f64 {
    let w = Weights::new(cfg);
    let r = stage_residual(&w, &x.to_vector(), x_ref, input.map(|(c, _)| c), input.map(|(_, r)| r));
    r.norm_squared()
}

#[derive(Debug, Clone)]
struct Weights {
    p: Vector3<f64>,
    v: Vector3<f64>,
    q: Vector3<f64>,
    w: Vector3<f64>,
    r: Vector4<f64>,
}

impl Weights {
    fn new(cfg: &OcpConfig) -> Self {
        let s3 = |a: &[f64; 3]| Vector3::new(a[0].sqrt(), a[1].sqrt(), a[2].sqrt());
        Self {
            p: s3(&cfg.q_position),
            v: s3(&cfg.q_velocity),
            q: s3(&cfg.q_attitude),
            w: s3(&cfg.q_rate),
            r: Vector4::new(
                cfg.r_input[0].sqrt(),
                cfg.r_input[1].sqrt(),
                cfg.r_input[2].sqrt(),
                cfg.r_input[3].sqrt(),
            ),
        }
    }
}

/// Square-root-weighted residual; its squared norm is the stage cost.
fn stage_residual(
    w: &Weights,
    x: &StateVector,
    reference: &ReferencePoint,
    c: Option<&Vector4<f64>>,
    c_ref: Option<&Vector4<f64>>,
) -> DVector<f64> {
    let rows = if c.is_some() { STAGE_ROWS } else { TERMINAL_ROWS };
    let mut r = DVector::zeros(rows);
    let q = Quaternion::new(x[3], x[4], x[5], x[6]);
    let p = x.fixed_rows::<3>(0) - reference.p;
    let v = x.fixed_rows::<3>(7) - reference.v;
    let e = q.error_vec(&reference.q);
    let om = x.fixed_rows::<3>(10) - reference.omega;
    r.rows_mut(0, 3).copy_from(&p.component_mul(&w.p));
    r.rows_mut(3, 3).copy_from(&v.component_mul(&w.v));
    r.rows_mut(6, 3).copy_from(&e.component_mul(&w.q));
    r.rows_mut(9, 3).copy_from(&om.component_mul(&w.w));
    if let Some(c) = c {
        let c_ref = c_ref.copied().unwrap_or(reference.c);
        r.rows_mut(12, 4).copy_from(&(c - c_ref).component_mul(&w.r));
    }
    r
}

/// Jacobian of the stage residual with respect to the state (rows × 13).
fn stage_state_jacobian(w: &Weights, x: &StateVector, reference: &ReferencePoint, rows: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(rows, 13);
    for i in 0..3 {
        j[(i, i)] = w.p[i];
        j[(3 + i, 7 + i)] = w.v[i];
        j[(9 + i, 10 + i)] = w.w[i];
    }
    let q = Quaternion::new(x[3], x[4], x[5], x[6]);
    let prod = q * reference.q.conjugate();
    let sign = if prod.w < 0.0 { -1.0 } else { 1.0 };
    let m = reference.q.conjugate().right_matrix();
    for i in 0..3 {
        for k in 0..4 {
            j[(6 + i, 3 + k)] = sign * w.q[i] * m[(1 + i, k)];
        }
    }
    j
}

/// Gauss-Newton SQP solver holding warm-start memory between ticks.
#[derive(Debug, Clone)]
pub struct NmpcSolver {
    pub cfg: OcpConfig,
    pub params: VehicleParams,
    previous: Option<OcpSolution>,
}

impl NmpcSolver {
    pub fn new(cfg: OcpConfig, params: VehicleParams) -> Self {
        Self {
            cfg,
            params,
            previous: None,
        }
    }

    pub fn previous(&self) -> Option<&OcpSolution> {
        self.previous.as_ref()
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// One control tick: warm-started from the previous solution advanced by
    /// `elapsed` seconds, limited to `cfg.tick_iterations` SQP iterations.
    pub fn tick(
        &mut self,
        x_init: &VehicleState,
        reference: &[ReferencePoint],
        elapsed: f64,
    ) -> Result<OcpSolution, NmpcError> {
        let warm = self.previous.as_ref().map(|s| shift_inputs(s, elapsed, self.cfg.dt()));
        let sol = solve_ocp_inner(
            x_init,
            reference,
            warm.as_deref(),
            &self.cfg,
            &self.params,
            self.cfg.tick_iterations,
        )?;
        self.previous = Some(sol.clone());
        Ok(sol)
    }
}

/// Previous inputs advanced by `elapsed`, holding each stage's input
/// piecewise constant and repeating the last one.
fn shift_inputs(sol: &OcpSolution, elapsed: f64, dt: f64) -> Vec<Vector4<f64>> {
    let n = sol.inputs.len();
    (0..n)
        .map(|k| {
            let idx = ((k as f64 * dt + elapsed) / dt + 1e-9).floor() as usize;
            sol.inputs[idx.min(n - 1)]
        })
        .collect()
}

/// Solves the optimal control problem to `cfg.tolerance` or `cfg.max_iterations`.
pub fn solve_ocp(
    x_init: &VehicleState,
    reference: &[ReferencePoint],
    warm_start: Option<&OcpSolution>,
    cfg: &OcpConfig,
    params: &VehicleParams,
) -> Result<OcpSolution, NmpcError> {
    solve_ocp_inner(
        x_init,
        reference,
        warm_start.map(|s| s.inputs.as_slice()),
        cfg,
        params,
        cfg.max_iterations,
    )
}

/// First-stage thrust and the predicted body rate one stage ahead.
pub fn extract_commands(sol: &OcpSolution) -> (f64, Vector3<f64>) {
    (sol.inputs[0][0], sol.states[1].omega)
}

/// Inputs flattened as `[c_0; c_1; …]`.
fn flatten(inputs: &[Vector4<f64>]) -> DVector<f64> {
    DVector::from_iterator(inputs.len() * 4, inputs.iter().flat_map(|c| c.iter().copied()))
}

fn unflatten(u: &DVector<f64>) -> Vec<Vector4<f64>> {
    u.as_slice().chunks(4).map(Vector4::from_column_slice).collect()
}

struct Problem<'a> {
    model: Model,
    weights: Weights,
    x0: StateVector,
    reference: &'a [ReferencePoint],
    dt: f64,
    n: usize,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(
        x_init: &VehicleState,
        reference: &'a [ReferencePoint],
        cfg: &OcpConfig,
        params: &VehicleParams,
    ) -> Result<Self, NmpcError> {
        if let Some(i) = (0..4).find(|&i| !(cfg.input_min[i] <= cfg.input_max[i])) {
            return Err(NmpcError::InfeasibleBounds(i));
        }
        if reference.len() != cfg.steps + 1 {
            return Err(NmpcError::ReferenceLength {
                expected: cfg.steps + 1,
                got: reference.len(),
            });
        }
        if !x_init.is_finite() {
            return Err(NmpcError::NonFiniteState);
        }
        let n = cfg.steps;
        let lower = DVector::from_fn(4 * n, |i, _| cfg.input_min[i % 4]);
        let upper = DVector::from_fn(4 * n, |i, _| cfg.input_max[i % 4]);
        Ok(Self {
            model: Model::new(cfg, params),
            weights: Weights::new(cfg),
            x0: x_init.normalized().to_vector(),
            reference,
            dt: cfg.dt(),
            n,
            lower,
            upper,
        })
    }

    fn rollout(&self, u: &DVector<f64>) -> Result<Vec<StateVector>, NmpcError> {
        let mut xs = Vec::with_capacity(self.n + 1);
        xs.push(self.x0);
        for k in 0..self.n {
            let c = Vector4::from_column_slice(&u.as_slice()[4 * k..4 * k + 4]);
            let next = self.model.step(&xs[k], &c, self.dt);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(NmpcError::NonFiniteState);
            }
            xs.push(next);
        }
        Ok(xs)
    }

    fn cost(&self, u: &DVector<f64>, xs: &[StateVector]) -> f64 {
        let mut total = 0.0;
        for k in 0..self.n {
            let c = Vector4::from_column_slice(&u.as_slice()[4 * k..4 * k + 4]);
            total += stage_residual(&self.weights, &xs[k], &self.reference[k], Some(&c), None).norm_squared();
        }
        total + stage_residual(&self.weights, &xs[self.n], &self.reference[self.n], None, None).norm_squared()
    }

    /// Residual vector and its Jacobian with respect to all inputs.
    fn linearize(&self, u: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), NmpcError> {
        let nu = 4 * self.n;
        let rows = STAGE_ROWS * self.n + TERMINAL_ROWS;
        let mut r = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, nu);
        // sensitivity of the current node state to every input
        let mut sens = DMatrix::<f64>::zeros(13, nu);
        let mut x = self.x0;
        for k in 0..self.n {
            let c = Vector4::from_column_slice(&u.as_slice()[4 * k..4 * k + 4]);
            let reference = &self.reference[k];
            let row = STAGE_ROWS * k;
            r.rows_mut(row, STAGE_ROWS)
                .copy_from(&stage_residual(&self.weights, &x, reference, Some(&c), None));
            let jx = stage_state_jacobian(&self.weights, &x, reference, STAGE_ROWS);
            let cols = 4 * k;
            if cols > 0 {
                let block = &jx * sens.columns(0, cols);
                jac.view_mut((row, 0), (STAGE_ROWS, cols)).copy_from(&block);
            }
            for i in 0..4 {
                jac[(row + 12 + i, 4 * k + i)] = self.weights.r[i];
            }

            let (next, a, b) = self.model.step_with_jacobians(&x, &c, self.dt);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(NmpcError::NonFiniteState);
            }
            let a_dyn = DMatrix::from_column_slice(13, 13, a.as_slice());
            let mut next_sens = DMatrix::zeros(13, nu);
            if cols > 0 {
                let prop = &a_dyn * sens.columns(0, cols);
                next_sens.columns_mut(0, cols).copy_from(&prop);
            }
            for i in 0..13 {
                for j in 0..4 {
                    next_sens[(i, cols + j)] = b[(i, j)];
                }
            }
            sens = next_sens;
            x = next;
        }
        let row = STAGE_ROWS * self.n;
        let reference = &self.reference[self.n];
        r.rows_mut(row, TERMINAL_ROWS)
            .copy_from(&stage_residual(&self.weights, &x, reference, None, None));
        let jx = stage_state_jacobian(&self.weights, &x, reference, TERMINAL_ROWS);
        jac.view_mut((row, 0), (TERMINAL_ROWS, nu)).copy_from(&(&jx * &sens));
        Ok((r, jac))
    }

    fn projected_gradient(&self, u: &DVector<f64>, grad: &DVector<f64>) -> f64 {
        (0..u.len())
            .map(|i| (u[i] - (u[i] - grad[i]).clamp(self.lower[i], self.upper[i])).abs())
            .fold(0.0, f64::max)
    }
}

/// Exact gradient of the condensed objective with respect to the flattened inputs.
pub fn condensed_gradient(
    x_init: &VehicleState,
    reference: &[ReferencePoint],
    inputs: &[Vector4<f64>],
    cfg: &OcpConfig,
    params: &VehicleParams,
) -> Result<DVector<f64>, NmpcError> {
    let prob = Problem::new(x_init, reference, cfg, params)?;
    let (r, jac) = prob.linearize(&flatten(inputs))?;
    Ok(jac.tr_mul(&r) * 2.0)
}

/// Condensed objective: inputs rolled out through the prediction model from `x_init`.
pub fn condensed_cost(
    x_init: &VehicleState,
    reference: &[ReferencePoint],
    inputs: &[Vector4<f64>],
    cfg: &OcpConfig,
    params: &VehicleParams,
) -> Result<f64, NmpcError> {
    let prob = Problem::new(x_init, reference, cfg, params)?;
    let u = flatten(inputs);
    let xs = prob.rollout(&u)?;
    Ok(prob.cost(&u, &xs))
}

fn solve_ocp_inner(
    x_init: &VehicleState,
    reference: &[ReferencePoint],
    warm: Option<&[Vector4<f64>]>,
    cfg: &OcpConfig,
    params: &VehicleParams,
    max_iterations: usize,
) -> Result<OcpSolution, NmpcError> {
    let prob = Problem::new(x_init, reference, cfg, params)?;
    let mut u = match warm {
        Some(w) if w.len() == prob.n => flatten(w),
        _ => flatten(&reference[..prob.n].iter().map(|r| r.c).collect::<Vec<_>>()),
    };
    u = DVector::from_fn(u.len(), |i, _| u[i].clamp(prob.lower[i], prob.upper[i]));

    let mut xs = prob.rollout(&u)?;
    let mut cost = prob.cost(&u, &xs);
    let mut history = vec![cost];
    let qp_opts = QpOptions::default();
    let mut kkt;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let (r, jac) = prob.linearize(&u)?;
        let grad = jac.tr_mul(&r) * 2.0;
        kkt = prob.projected_gradient(&u, &grad);
        if kkt < cfg.tolerance {
            converged = true;
            break;
        }
        if iterations >= max_iterations {
            break;
        }
        iterations += 1;

        let mut hessian = jac.tr_mul(&jac) * 2.0;
        hessian = (&hessian + hessian.transpose()) * 0.5;
        let qp = BoxQp::new(hessian, grad.clone(), &prob.lower - &u, &prob.upper - &u);
        let step = solve_box_qp_with(&qp, None, &qp_opts)?.x;

        let slope = grad.dot(&step);
        if slope >= 0.0 {
            // no descent direction left at working precision
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-10 {
            let trial = &u + &step * alpha;
            if let Ok(trial_xs) = prob.rollout(&trial) {
                let trial_cost = prob.cost(&trial, &trial_xs);
                if trial_cost <= cost + 1e-4 * alpha * slope {
                    u = trial;
                    xs = trial_xs;
                    cost = trial_cost;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(cost);
    }

    Ok(OcpSolution {
        states: xs.iter().map(VehicleState::from_vector).collect(),
        inputs: unflatten(&u),
        kkt_residual: kkt,
        iterations,
        cost_history: history,
        converged,
    })
}
