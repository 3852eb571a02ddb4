use nalgebra::SVector;

use super::MathError;

/// One classic fourth-order Runge-Kutta step of `ẋ = f(x)` over `dt`.
///
/// Time-varying dynamics can carry the clock as an extra state component.
pub fn rk4_step<const N: usize, F>(
    mut f: F,
    x: &SVector<f64, N>,
    dt: f64,
) -> Result<SVector<f64, N>, MathError>
where
    F: FnMut(&SVector<f64, N>) -> SVector<f64, N>,
{
    let mut stage = |x: &SVector<f64, N>, i: usize| {
        let k = f(x);
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(MathError::NonFiniteDerivative { stage: i })
        }
    };
    let k1 = stage(x, 1)?;
    let k2 = stage(&(x + k1 * (0.5 * dt)), 2)?;
    let k3 = stage(&(x + k2 * (0.5 * dt)), 3)?;
    let k4 = stage(&(x + k3 * dt), 4)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quaternion;
    use nalgebra::{Vector2, Vector3, Vector4};

    #[test]
    fn free_fall_is_exact() {
        let g = -9.81;
        let dt = 0.37;
        let x = rk4_step(|s: &Vector2<f64>| Vector2::new(s[1], g), &Vector2::zeros(), dt).unwrap();
        assert!((x[0] - 0.5 * g * dt * dt).abs() < 1e-15);
        assert!((x[1] - g * dt).abs() < 1e-15);
    }

    #[test]
    fn quartic_solution_is_exact() {
        // state = (clock, y) with y(t) = t⁴ - t³ + t
        let f = |s: &Vector2<f64>| {
            let t = s[0];
            Vector2::new(1.0, 4.0 * t.powi(3) - 3.0 * t * t + 1.0)
        };
        let y = |t: f64| t.powi(4) - t.powi(3) + t;
        let (t0, dt) = (0.4, 0.9);
        let x = rk4_step(f, &Vector2::new(t0, y(t0)), dt).unwrap();
        assert!((x[1] - y(t0 + dt)).abs() < 1e-13);
    }

    #[test]
    fn exponential_decay() {
        let x = rk4_step(|s: &SVector<f64, 1>| -s, &SVector::<f64, 1>::new(1.0), 0.1).unwrap();
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let r = rk4_step(|_: &SVector<f64, 1>| SVector::<f64, 1>::new(f64::NAN), &SVector::<f64, 1>::zeros(), 0.1);
        assert_eq!(r, Err(MathError::NonFiniteDerivative { stage: 1 }));
        // blows up only at the full-step stage
        let r = rk4_step(
            |s: &SVector<f64, 1>| SVector::<f64, 1>::new(if s[0] > 0.09 { f64::INFINITY } else { 1.0 }),
            &SVector::<f64, 1>::zeros(),
            0.1,
        );
        assert_eq!(r, Err(MathError::NonFiniteDerivative { stage: 4 }));
    }

    /// Torque-free spin about a tilted axis with the attitude integrated
    /// alongside; compared with the analytic `q(t) = q0 ⊗ exp(ω t)`.
    pub(crate) fn spin_error(dt: f64, t_end: f64) -> f64 {
        let omega = Vector3::new(1.3, -0.7, 2.1);
        let f = |s: &Vector4<f64>| {
            let q = Quaternion::from_vector4(s);
            (q * Quaternion::pure(&omega)).to_vector4() * 0.5
        };
        let q0 = Quaternion::from_axis_angle(&Vector3::new(0.2, 1.0, -0.4), 0.8);
        let steps = (t_end / dt).round() as usize;
        let mut x = q0.to_vector4();
        for _ in 0..steps {
            x = rk4_step(f, &x, dt).unwrap();
        }
        let exact = q0 * Quaternion::exp_map(&(omega * t_end));
        (x - exact.to_vector4()).norm()
    }

    #[test]
    fn spin_convergence_is_fourth_order() {
        let e1 = spin_error(0.02, 2.0);
        let e2 = spin_error(0.01, 2.0);
        let slope = (e1 / e2).log2();
        assert!((3.8..=4.2).contains(&slope), "slope {slope}");
    }
}
