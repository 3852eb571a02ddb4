//! Dense box-constrained convex QP:
//!
//! ```text
//!     minimize   ½ uᵀ H u + gᵀ u
//!     subject to lower ≤ u ≤ upper
//! ```
//!
//! solved with a primal active-set method. Warm starts take the previous
//! solution; between consecutive control ticks the active set rarely changes,
//! so the method typically terminates after one linear solve.

use nalgebra::{DMatrix, DVector};

use super::MathError;

#[derive(Debug, Clone)]
pub struct BoxQp {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    /// Relative KKT tolerance; scaled by `max(1, ‖g‖∞, ‖H‖∞)`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// `‖u - clamp(u - ∇f(u))‖∞` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

impl BoxQp {
    pub fn new(
        hessian: DMatrix<f64>,
        gradient: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Self {
        Self {
            hessian,
            gradient,
            lower,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.hessian * u)) + self.gradient.dot(u)
    }

    pub fn objective_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.hessian * u + &self.gradient
    }

    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| u[i].clamp(self.lower[i], self.upper[i]))
    }

    /// Projected-gradient KKT residual.
    pub fn kkt_residual(&self, u: &DVector<f64>) -> f64 {
        let grad = self.objective_gradient(u);
        (u - self.project(&(u - grad))).amax()
    }

    fn scale(&self) -> f64 {
        1f64.max(self.gradient.amax()).max(self.hessian.amax())
    }

    pub fn validate(&self) -> Result<(), MathError> {
        let n = self.dim();
        if self.hessian.shape() != (n, n) || self.lower.len() != n || self.upper.len() != n {
            return Err(MathError::DimensionMismatch);
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.gradient.iter().all(|v| v.is_finite())
            && self.lower.iter().chain(self.upper.iter()).all(|v| !v.is_nan());
        if !finite {
            return Err(MathError::NonFiniteProblem);
        }
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-12 * 1f64.max(self.hessian.amax()) {
            return Err(MathError::AsymmetricHessian(asym));
        }
        if let Some(i) = (0..n).find(|&i| self.lower[i] > self.upper[i]) {
            return Err(MathError::InvertedBounds { index: i });
        }
        Ok(())
    }
}

/// Solves the QP from a cold start and returns the minimizer.
pub fn solve_box_qp(p: &BoxQp) -> Result<DVector<f64>, MathError> {
    solve_box_qp_with(p, None, &QpOptions::default()).map(|s| s.x)
}

/// Solves the QP, optionally warm-started from `warm` (projected onto the box).
pub fn solve_box_qp_with(
    p: &BoxQp,
    warm: Option<&DVector<f64>>,
    opts: &QpOptions,
) -> Result<QpSolution, MathError> {
    p.validate()?;
    let n = p.dim();
    let tol = opts.tolerance * p.scale();

    let start = match warm {
        Some(w) if w.len() == n => w.clone(),
        _ => DVector::from_fn(n, |i, _| {
            if p.lower[i].is_finite() && p.upper[i].is_finite() {
                0.5 * (p.lower[i] + p.upper[i])
            } else {
                0.0
            }
        }),
    };
    let mut x = p.project(&start);

    // Start with every coordinate that sits on a bound and is pushed against it.
    let grad0 = p.objective_gradient(&x);
    let mut set: Vec<Bound> = (0..n)
        .map(|i| {
            if p.lower[i] == p.upper[i] || (x[i] <= p.lower[i] && grad0[i] >= 0.0) {
                Bound::Lower
            } else if x[i] >= p.upper[i] && grad0[i] <= 0.0 {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();

    for iteration in 1..=opts.max_iterations {
        for i in 0..n {
            match set[i] {
                Bound::Lower => x[i] = p.lower[i],
                Bound::Upper => x[i] = p.upper[i],
                Bound::Free => {}
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| set[i] == Bound::Free).collect();

        if !free.is_empty() {
            let target = free_subproblem(p, &x, &free)?;
            // Largest step toward the subproblem minimizer that stays feasible.
            let mut alpha = 1.0;
            let mut blocking = None;
            for (k, &i) in free.iter().enumerate() {
                let d = target[k] - x[i];
                if d < 0.0 && p.lower[i].is_finite() {
                    let a = (p.lower[i] - x[i]) / d;
                    if a < alpha {
                        alpha = a;
                        blocking = Some((i, Bound::Lower));
                    }
                } else if d > 0.0 && p.upper[i].is_finite() {
                    let a = (p.upper[i] - x[i]) / d;
                    if a < alpha {
                        alpha = a;
                        blocking = Some((i, Bound::Upper));
                    }
                }
            }
            let alpha = alpha.max(0.0);
            for (k, &i) in free.iter().enumerate() {
                x[i] += alpha * (target[k] - x[i]);
            }
            if let Some((i, b)) = blocking {
                set[i] = b;
                continue;
            }
        }

        // Subproblem optimum is feasible: check multiplier signs.
        let grad = p.objective_gradient(&x);
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            if p.lower[i] == p.upper[i] {
                continue;
            }
            let violation = match set[i] {
                Bound::Lower => -grad[i],
                Bound::Upper => grad[i],
                Bound::Free => continue,
            };
            if violation > tol && worst.is_none_or(|(_, v)| violation > v) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => set[i] = Bound::Free,
            None => {
                let residual = p.kkt_residual(&x);
                return Ok(QpSolution {
                    x,
                    residual,
                    iterations: iteration,
                });
            }
        }
    }

    Err(MathError::QpNotConverged {
        iterations: opts.max_iterations,
        residual: p.kkt_residual(&x),
    })
}

/// Minimizer over the free coordinates with the others held at `x`.
fn free_subproblem(p: &BoxQp, x: &DVector<f64>, free: &[usize]) -> Result<Vec<f64>, MathError> {
    let m = free.len();
    let n = p.dim();
    let mut is_free = vec![false; n];
    for &i in free {
        is_free[i] = true;
    }
    let mut h = DMatrix::from_fn(m, m, |a, b| p.hessian[(free[a], free[b])]);
    let mut rhs = DVector::from_fn(m, |a, _| {
        let i = free[a];
        let mut r = -p.gradient[i];
        for j in (0..n).filter(|&j| !is_free[j]) {
            r -= p.hessian[(i, j)] * x[j];
        }
        r
    });
    // Semidefinite reduced Hessians get a vanishing proximal shift.
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(chol) = h.clone().cholesky() {
            chol.solve_mut(&mut rhs);
            return Ok(rhs.iter().copied().collect());
        }
        let next = if shift == 0.0 {
            1e-12 * 1f64.max(p.hessian.amax())
        } else {
            shift * 100.0
        };
        for a in 0..m {
            h[(a, a)] += next - shift;
        }
        shift = next;
    }
    Err(MathError::SingularSubproblem)
}
