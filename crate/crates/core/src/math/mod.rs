//! Shared numerics: quaternion algebra, RK4 and the box-constrained QP.

mod integrate;
mod qp;
mod quaternion;

pub use integrate::rk4_step;
pub use qp::{solve_box_qp, solve_box_qp_with, BoxQp, QpOptions, QpSolution};
pub use quaternion::{quat_error_vec, quat_exp_map, quat_multiply, Quaternion};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MathError {
    #[error("non-finite derivative at RK4 stage {stage}")]
    NonFiniteDerivative { stage: usize },
    #[error("QP dimensions are inconsistent")]
    DimensionMismatch,
    #[error("QP data contains non-finite values")]
    NonFiniteProblem,
    #[error("QP Hessian is not symmetric (max deviation {0:e})")]
    AsymmetricHessian(f64),
    #[error("QP bounds inverted at index {index}")]
    InvertedBounds { index: usize },
    #[error("QP reduced Hessian could not be factored")]
    SingularSubproblem,
    #[error("QP did not converge after {iterations} iterations (KKT residual {residual:e})")]
    QpNotConverged { iterations: usize, residual: f64 },
}
