use nalgebra::DVector;

use super::{validate_point, DcProblem};
use crate::error::{DcError, Result};
use crate::linalg::spd_solve;
use crate::scalar::{lit, Scalar};

const MAX_BACKTRACKS: usize = 60;

/// Settings for the damped Newton inversion of `∇g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig<T: Scalar> {
    /// Stop once `‖∇g(x) − y‖ ≤ tol_grad`.
    pub tol_grad: T,
    pub max_iter: usize,
    pub armijo_c: T,
    pub armijo_shrink: T,
}

impl<T: Scalar> Default for NewtonConfig<T> {
    /// `tol_grad = 1e-10` in double precision. Narrower types get 64 machine
    /// epsilons instead.
    fn default() -> Self {
        let floor = T::machine_eps() * lit(64.0);
        Self {
            tol_grad: lit::<T>(1e-10).max(floor),
            max_iter: 100,
            armijo_c: lit(1e-4),
            armijo_shrink: lit(0.5),
        }
    }
}

impl<T: Scalar> NewtonConfig<T> {
    pub fn with_tol(mut self, tol_grad: T) -> Self {
        self.tol_grad = tol_grad;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_grad > T::zero()) {
            return Err(DcError::InvalidInput("newton tol_grad must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(DcError::InvalidInput("newton max_iter must be at least 1".into()));
        }
        let unit = |v: T| v > T::zero() && v < T::one();
        if !unit(self.armijo_c) || !unit(self.armijo_shrink) {
            return Err(DcError::InvalidInput(
                "armijo_c and armijo_shrink must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a gradient-map inversion with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion<T: Scalar> {
    pub x: DVector<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Solves `∇g(x) = y`.
///
/// Damped Newton on the μ-strongly convex potential `φ(x) = g(x) − ⟨y, x⟩`
/// with Armijo backtracking. A trial step is also accepted when it shrinks the
/// residual norm, which keeps the final iterations moving once `φ` differences
/// fall below rounding.
pub fn invert_grad_g<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    y: &DVector<T>,
    warm_start: &DVector<T>,
    cfg: &NewtonConfig<T>,
) -> Result<DVector<T>> {
    invert_grad_g_with_stats(p, y, warm_start, cfg).map(|inv| inv.x)
}

pub fn invert_grad_g_with_stats<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    y: &DVector<T>,
    warm_start: &DVector<T>,
    cfg: &NewtonConfig<T>,
) -> Result<Inversion<T>> {
    cfg.validate()?;
    validate_point(p, y)?;
    validate_point(p, warm_start)?;
    if !(p.mu() > T::zero()) {
        return Err(DcError::InvalidInput("strong convexity constant mu must be positive".into()));
    }

    let potential = |x: &DVector<T>| p.g_value(x) - y.dot(x);
    let mut x = warm_start.clone();
    let mut r = p.g_grad(&x) - y;
    let mut r_norm = r.norm();
    let mut phi = potential(&x);

    for it in 0..=cfg.max_iter {
        if !r_norm.is_finite() || !phi.is_finite() {
            return Err(DcError::Numeric("non-finite residual in gradient inversion".into()));
        }
        if r_norm <= cfg.tol_grad {
            return Ok(Inversion { x, residual: r_norm, iterations: it });
        }
        if it == cfg.max_iter {
            break;
        }

        let dir = -spd_solve(&p.g_hess(&x), &r)?;
        let slope = r.dot(&dir);
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &dir * alpha;
            let phi_trial = potential(&trial);
            let r_trial = p.g_grad(&trial) - y;
            let r_trial_norm = r_trial.norm();
            let armijo = phi_trial <= phi + cfg.armijo_c * alpha * slope;
            if phi_trial.is_finite() && r_trial_norm.is_finite() && (armijo || r_trial_norm < r_norm) {
                x = trial;
                r = r_trial;
                r_norm = r_trial_norm;
                phi = phi_trial;
                accepted = true;
                break;
            }
            alpha *= cfg.armijo_shrink;
        }
        if !accepted {
            break;
        }
    }

    Err(DcError::Convergence { iterations: cfg.max_iter, best_residual: r_norm.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DoubleWellDc, QuadraticDc};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn quad(a: f64, b: f64) -> QuadraticDc<f64> {
        QuadraticDc::new(DMatrix::identity(2, 2) * a, DMatrix::identity(2, 2) * b).unwrap()
    }

    #[test]
    fn diagonal_quadratic_solve() {
        let p = quad(2.0, 1.0);
        let x = invert_grad_g(&p, &DVector::from_vec(vec![2.0, 4.0]), &DVector::zeros(2), &NewtonConfig::default())
            .unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![1.0, 2.0]), epsilon = 1e-12);
    }

    #[test]
    fn scalar_double_well_cubic() {
        // x³ + x = 2 has the root x = 1.
        let p = DoubleWellDc::new(DVector::from_vec(vec![1.0])).unwrap();
        let inv = invert_grad_g_with_stats(&p, &DVector::from_vec(vec![2.0]), &DVector::from_vec(vec![-3.0]), &NewtonConfig::default())
            .unwrap();
        assert_relative_eq!(inv.x[0], 1.0, epsilon = 1e-10);
        assert!(inv.residual <= 1e-10);
    }

    #[test]
    fn far_warm_start_still_converges() {
        let p = DoubleWellDc::new(DVector::from_vec(vec![0.1, 3.0])).unwrap();
        let target = DVector::from_vec(vec![-40.0, 55.0]);
        let x = invert_grad_g(&p, &target, &DVector::from_vec(vec![100.0, -100.0]), &NewtonConfig::default()).unwrap();
        assert!((p.g_grad(&x) - target).norm() <= 1e-10);
    }

    #[test]
    fn iteration_cap_reports_best_residual() {
        let p = DoubleWellDc::new(DVector::from_vec(vec![1.0])).unwrap();
        let cfg = NewtonConfig { max_iter: 1, ..NewtonConfig::default() };
        let err = invert_grad_g(&p, &DVector::from_vec(vec![1000.0]), &DVector::zeros(1), &cfg).unwrap_err();
        match err {
            DcError::Convergence { iterations, best_residual } => {
                assert_eq!(iterations, 1);
                assert!(best_residual > 0.0 && best_residual.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_target_is_rejected() {
        let p = quad(2.0, 1.0);
        let y = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(invert_grad_g(&p, &y, &DVector::zeros(2), &NewtonConfig::default()).is_err());
    }

    #[test]
    fn invalid_config() {
        let cfg = NewtonConfig { armijo_c: 1.5, ..NewtonConfig::<f64>::default() };
        assert!(cfg.validate().is_err());
        let cfg = NewtonConfig { max_iter: 0, ..NewtonConfig::<f64>::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_precision_default_is_attainable() {
        let cfg = NewtonConfig::<f32>::default();
        assert!(cfg.tol_grad > f32::EPSILON && cfg.tol_grad < 1e-4);
        let p = DoubleWellDc::<f32>::new(DVector::from_vec(vec![1.0f32, 2.0])).unwrap();
        let x = invert_grad_g(&p, &DVector::from_vec(vec![2.0f32, 3.0]), &DVector::zeros(2), &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }
}
