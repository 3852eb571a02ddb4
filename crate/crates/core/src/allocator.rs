//! Rotor thrust allocation as a box-constrained least-squares problem on the
//! realized wrench `[T, τ]`.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::math::{solve_box_qp_with, BoxQp, MathError, QpOptions};
use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocatorWeights {
    /// Wrench-error weight `Q_f` diagonal.
    pub wrench: [f64; 4],
    /// Effort weight `R_f` diagonal.
    pub effort: [f64; 4],
}

impl Default for AllocatorWeights {
    fn default() -> Self {
        Self {
            wrench: [1.0, 20.0, 20.0, 20.0],
            effort: [1e-4; 4],
        }
    }
}

impl AllocatorWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.wrench.iter().any(|w| !(*w > 0.0)) || self.effort.iter().any(|r| !(*r >= 0.0)) {
            return Err(ConfigError::Invalid(
                "allocator wrench weights must be positive and effort weights non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    /// `[T, τx, τy, τz]`.
    pub wrench: Vector4<f64>,
    pub effectiveness: Matrix4<f64>,
    pub wrench_weight: Matrix4<f64>,
    pub effort_weight: Matrix4<f64>,
    pub u_min: f64,
    pub u_max: f64,
}

impl AllocationProblem {
    pub fn new(wrench: Vector4<f64>, effectiveness: Matrix4<f64>, weights: &AllocatorWeights, u_min: f64, u_max: f64) -> Self {
        Self {
            wrench,
            effectiveness,
            wrench_weight: Matrix4::from_diagonal(&Vector4::from(weights.wrench)),
            effort_weight: Matrix4::from_diagonal(&Vector4::from(weights.effort)),
            u_min,
            u_max,
        }
    }

    pub fn to_qp(&self) -> BoxQp {
        let g = &self.effectiveness;
        let h = (g.transpose() * self.wrench_weight * g + self.effort_weight) * 2.0;
        let h = (h + h.transpose()) * 0.5;
        let grad = g.transpose() * self.wrench_weight * self.wrench * -2.0;
        BoxQp::new(
            DMatrix::from_column_slice(4, 4, h.as_slice()),
            DVector::from_column_slice(grad.as_slice()),
            DVector::from_element(4, self.u_min),
            DVector::from_element(4, self.u_max),
        )
    }

    /// Weighted realized-wrench error plus effort.
    pub fn objective(&self, u: &Vector4<f64>) -> f64 {
        let e = self.effectiveness * u - self.wrench;
        e.dot(&(self.wrench_weight * e)) + u.dot(&(self.effort_weight * u))
    }
}

pub fn allocate(p: &AllocationProblem, warm: Option<&Vector4<f64>>) -> Result<Vector4<f64>, MathError> {
    let warm = warm.map(|w| DVector::from_column_slice(w.as_slice()));
    let sol = solve_box_qp_with(&p.to_qp(), warm.as_ref(), &QpOptions::default())?;
    Ok(Vector4::from_column_slice(sol.x.as_slice()))
}

/// Allocator with warm-start memory across ticks.
#[derive(Debug, Clone)]
pub struct Allocator {
    pub effectiveness: Matrix4<f64>,
    pub weights: AllocatorWeights,
    pub u_min: f64,
    pub u_max: f64,
    last: Option<Vector4<f64>>,
}

impl Allocator {
    pub fn new(effectiveness: Matrix4<f64>, weights: AllocatorWeights, u_min: f64, u_max: f64) -> Self {
        Self {
            effectiveness,
            weights,
            u_min,
            u_max,
            last: None,
        }
    }

    pub fn allocate(&mut self, wrench: &Vector4<f64>) -> Result<Vector4<f64>, MathError> {
        let p = AllocationProblem::new(*wrench, self.effectiveness, &self.weights, self.u_min, self.u_max);
        let u = allocate(&p, self.last.as_ref())?;
        self.last = Some(u);
        Ok(u)
    }
}
