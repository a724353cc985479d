//! Finite-difference and eigenvalue witnesses for the oracle invariants.

use nalgebra::{DMatrix, DVector};

use super::{bregman_g, validate_point, DcProblem};
use crate::error::Result;
use crate::linalg::eig_extremes;
use crate::scalar::{lit, Scalar};

/// Central-difference step `1e-5 · max(1, ‖x‖)`.
pub fn fd_step<T: Scalar>(x: &DVector<T>) -> T {
    lit::<T>(1e-5) * x.norm().max(T::one())
}

fn central_gradient<T: Scalar>(f: impl Fn(&DVector<T>) -> T, x: &DVector<T>, step: T) -> DVector<T> {
    let two = lit::<T>(2.0);
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += step;
            xm[i] -= step;
            (f(&xp) - f(&xm)) / (two * step)
        }),
    )
}

fn central_jacobian<T: Scalar>(
    f: impl Fn(&DVector<T>) -> DVector<T>,
    x: &DVector<T>,
    step: T,
) -> DMatrix<T> {
    let n = x.len();
    let two = lit::<T>(2.0);
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let col = (f(&xp) - f(&xm)) / (two * step);
        jac.set_column(j, &col);
    }
    jac
}

/// Worst-case discrepancies found while sampling the oracle invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport<T: Scalar> {
    pub samples: usize,
    pub max_grad_err_g: T,
    pub max_grad_err_h: T,
    pub max_hess_err_g: T,
    pub max_hess_err_h: T,
    /// `min λ_min(∇²g(x)) − μ` over the samples; must be `≥ −1e-8`.
    pub min_strong_convexity_margin: T,
    /// `min λ_min(∇²h(x))`; must be `≥ −1e-8`.
    pub min_h_eigenvalue: T,
}

impl<T: Scalar> OracleReport<T> {
    /// `true` when every finite-difference error is below `fd_tol` and both
    /// eigenvalue witnesses clear `−eig_tol`.
    pub fn consistent(&self, fd_tol: T, eig_tol: T) -> bool {
        self.max_grad_err_g <= fd_tol
            && self.max_grad_err_h <= fd_tol
            && self.max_hess_err_g <= fd_tol
            && self.max_hess_err_h <= fd_tol
            && self.min_strong_convexity_margin >= -eig_tol
            && self.min_h_eigenvalue >= -eig_tol
    }
}

/// Compares analytic gradients and Hessians against central differences and
/// checks the convexity witnesses at every sample point. Errors are relative
/// to `max(1, ‖reference‖)`.
pub fn check_oracles<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    samples: &[DVector<T>],
) -> Result<OracleReport<T>> {
    let mut rep = OracleReport {
        samples: samples.len(),
        max_grad_err_g: T::zero(),
        max_grad_err_h: T::zero(),
        max_hess_err_g: T::zero(),
        max_hess_err_h: T::zero(),
        min_strong_convexity_margin: T::max_value().unwrap_or_else(T::one),
        min_h_eigenvalue: T::max_value().unwrap_or_else(T::one),
    };
    let rel = |err: T, reference: T| err / reference.max(T::one());
    for x in samples {
        validate_point(p, x)?;
        let h = fd_step(x);

        let gg = p.g_grad(x);
        let hg = p.h_grad(x);
        let fd_gg = central_gradient(|z| p.g_value(z), x, h);
        let fd_hg = central_gradient(|z| p.h_value(z), x, h);
        rep.max_grad_err_g = rep.max_grad_err_g.max(rel((&gg - fd_gg).amax(), gg.amax()));
        rep.max_grad_err_h = rep.max_grad_err_h.max(rel((&hg - fd_hg).amax(), hg.amax()));

        let gh = p.g_hess(x);
        let hh = p.h_hess(x);
        let fd_gh = central_jacobian(|z| p.g_grad(z), x, h);
        let fd_hh = central_jacobian(|z| p.h_grad(z), x, h);
        rep.max_hess_err_g = rep.max_hess_err_g.max(rel((&gh - fd_gh).amax(), gh.amax()));
        rep.max_hess_err_h = rep.max_hess_err_h.max(rel((&hh - fd_hh).amax(), hh.amax()));

        let (g_lo, _) = eig_extremes(&gh);
        let (h_lo, _) = eig_extremes(&hh);
        rep.min_strong_convexity_margin = rep.min_strong_convexity_margin.min(g_lo - p.mu());
        rep.min_h_eigenvalue = rep.min_h_eigenvalue.min(h_lo);
    }
    Ok(rep)
}

/// `D_g(x + tξ, x) / (½ t² ξᵀ∇²g(x)ξ)`, which tends to 1 as `t → 0`.
pub fn bregman_second_order_ratio<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x: &DVector<T>,
    xi: &DVector<T>,
    t: T,
) -> Result<T> {
    let z = x + xi * t;
    let d = bregman_g(p, &z, x)?;
    let quad = lit::<T>(0.5) * t * t * xi.dot(&(p.g_hess(x) * xi));
    Ok(d / quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::DoubleWellDc;

    #[test]
    fn step_scales_with_norm() {
        assert_eq!(fd_step(&DVector::from_vec(vec![0.1, 0.0])), 1e-5);
        assert!((fd_step(&DVector::<f64>::from_vec(vec![30.0, 40.0])) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        struct Broken;
        impl DcProblem<f64> for Broken {
            fn dim(&self) -> usize { 1 }
            fn g_value(&self, x: &DVector<f64>) -> f64 { x[0] * x[0] }
            fn h_value(&self, _: &DVector<f64>) -> f64 { 0.0 }
            fn g_grad(&self, x: &DVector<f64>) -> DVector<f64> { x * 3.0 }
            fn h_grad(&self, _: &DVector<f64>) -> DVector<f64> { DVector::zeros(1) }
            fn g_hess(&self, _: &DVector<f64>) -> DMatrix<f64> { DMatrix::identity(1, 1) * 2.0 }
            fn h_hess(&self, _: &DVector<f64>) -> DMatrix<f64> { DMatrix::zeros(1, 1) }
            fn mu(&self) -> f64 { 2.0 }
        }
        let rep = check_oracles(&Broken, &[DVector::from_vec(vec![1.0])]).unwrap();
        assert!(rep.max_grad_err_g > 0.1);
        assert!(!rep.consistent(1e-6, 1e-8));
    }

    #[test]
    fn double_well_ratio_tends_to_one() {
        let p = DoubleWellDc::new(DVector::from_vec(vec![1.0, 4.0])).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.8]);
        let xi = DVector::from_vec(vec![0.6, 0.8]);
        let r2: f64 = bregman_second_order_ratio(&p, &x, &xi, 1e-2).unwrap();
        let r3: f64 = bregman_second_order_ratio(&p, &x, &xi, 1e-3).unwrap();
        assert!((r3 - 1.0).abs() < (r2 - 1.0).abs());
        assert!((r3 - 1.0).abs() < 1e-2);
    }
}
