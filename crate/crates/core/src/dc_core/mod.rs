//! DC problem oracles, the Bregman divergence of `g`, the Hessian metric and
//! inversion of the gradient map `∇g`.

mod checks;
mod newton;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{DcError, Result};
use crate::linalg::spd_solve;
use crate::region::BoxRegion;
use crate::scalar::Scalar;

pub use checks::{bregman_second_order_ratio, check_oracles, fd_step, OracleReport};
pub use newton::{invert_grad_g, invert_grad_g_with_stats, Inversion, NewtonConfig};

/// Points and dual vectors share the dense column vector representation.
pub type Point<T> = DVector<T>;

/// Oracle bundle for a decomposition `f = g − h` with `g` μ-strongly convex
/// and `h` convex, both `C²`.
///
/// Implementations must be pure: every method is a function of its inputs
/// only, so a problem can be shared across threads.
pub trait DcProblem<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn g_value(&self, x: &DVector<T>) -> T;
    fn h_value(&self, x: &DVector<T>) -> T;
    fn g_grad(&self, x: &DVector<T>) -> DVector<T>;
    fn h_grad(&self, x: &DVector<T>) -> DVector<T>;
    fn g_hess(&self, x: &DVector<T>) -> DMatrix<T>;
    fn h_hess(&self, x: &DVector<T>) -> DMatrix<T>;

    /// Global strong-convexity constant of `g`.
    fn mu(&self) -> T;

    /// Box on which `lg` and the other certified constants hold.
    fn region(&self) -> Option<BoxRegion<T>> {
        None
    }

    /// Lipschitz constant of `∇g` on [`DcProblem::region`].
    fn lg(&self) -> Option<T> {
        None
    }

    /// Analytic infimum of `f` on the region, when known.
    fn f_star(&self) -> Option<T> {
        None
    }

    /// Analytic metric DC-PL constant σ on the region:
    /// `‖∇f(x)‖²_{G(x)⁻¹} ≥ 2σ (f(x) − f⋆)`.
    fn metric_pl_sigma(&self) -> Option<T> {
        None
    }

    /// Quadratic-growth constant α: `f(x) − f⋆ ≥ (α/2) dist(x, X⋆)²`.
    fn quadratic_growth(&self) -> Option<T> {
        None
    }

    /// Distance from `x` to the minimizer set, when it is known in closed form.
    fn dist_to_minimizers(&self, _x: &DVector<T>) -> Option<T> {
        None
    }

    /// Exact critical point near `x`, for instances whose critical set is known.
    fn nearest_critical_point(&self, _x: &DVector<T>) -> Option<DVector<T>> {
        None
    }

    fn name(&self) -> String {
        "custom".to_string()
    }
}

macro_rules! forward_dc_problem {
    ($($wrapper:ty),*) => {$(
        impl<T: Scalar, P: DcProblem<T> + ?Sized> DcProblem<T> for $wrapper {
            fn dim(&self) -> usize { (**self).dim() }
            fn g_value(&self, x: &DVector<T>) -> T { (**self).g_value(x) }
            fn h_value(&self, x: &DVector<T>) -> T { (**self).h_value(x) }
            fn g_grad(&self, x: &DVector<T>) -> DVector<T> { (**self).g_grad(x) }
            fn h_grad(&self, x: &DVector<T>) -> DVector<T> { (**self).h_grad(x) }
            fn g_hess(&self, x: &DVector<T>) -> DMatrix<T> { (**self).g_hess(x) }
            fn h_hess(&self, x: &DVector<T>) -> DMatrix<T> { (**self).h_hess(x) }
            fn mu(&self) -> T { (**self).mu() }
            fn region(&self) -> Option<BoxRegion<T>> { (**self).region() }
            fn lg(&self) -> Option<T> { (**self).lg() }
            fn f_star(&self) -> Option<T> { (**self).f_star() }
            fn metric_pl_sigma(&self) -> Option<T> { (**self).metric_pl_sigma() }
            fn quadratic_growth(&self) -> Option<T> { (**self).quadratic_growth() }
            fn dist_to_minimizers(&self, x: &DVector<T>) -> Option<T> { (**self).dist_to_minimizers(x) }
            fn nearest_critical_point(&self, x: &DVector<T>) -> Option<DVector<T>> {
                (**self).nearest_critical_point(x)
            }
            fn name(&self) -> String { (**self).name() }
        }
    )*};
}

forward_dc_problem!(&P, Box<P>, Arc<P>);

/// Checks length and finiteness of a point or dual vector.
pub fn validate_point<T: Scalar, P: DcProblem<T> + ?Sized>(p: &P, x: &DVector<T>) -> Result<()> {
    if x.len() != p.dim() {
        return Err(DcError::DimensionMismatch { expected: p.dim(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DcError::NonFinite("point"));
    }
    Ok(())
}

pub fn f_value<T: Scalar, P: DcProblem<T> + ?Sized>(p: &P, x: &DVector<T>) -> Result<T> {
    validate_point(p, x)?;
    Ok(p.g_value(x) - p.h_value(x))
}

pub fn f_grad<T: Scalar, P: DcProblem<T> + ?Sized>(p: &P, x: &DVector<T>) -> Result<DVector<T>> {
    validate_point(p, x)?;
    Ok(p.g_grad(x) - p.h_grad(x))
}

pub fn f_hess<T: Scalar, P: DcProblem<T> + ?Sized>(p: &P, x: &DVector<T>) -> Result<DMatrix<T>> {
    validate_point(p, x)?;
    Ok(p.g_hess(x) - p.h_hess(x))
}

/// `D_g(z, x) = g(z) − g(x) − ⟨∇g(x), z − x⟩`.
pub fn bregman_g<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    z: &DVector<T>,
    x: &DVector<T>,
) -> Result<T> {
    validate_point(p, z)?;
    validate_point(p, x)?;
    Ok(p.g_value(z) - p.g_value(x) - p.g_grad(x).dot(&(z - x)))
}

/// `T(y) = ∇h((∇g)⁻¹(y))`.
pub fn t_map<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    y: &DVector<T>,
    warm_start: &DVector<T>,
    cfg: &NewtonConfig<T>,
) -> Result<DVector<T>> {
    let x = invert_grad_g(p, y, warm_start, cfg)?;
    Ok(p.h_grad(&x))
}

/// Squared dual norm `vᵀ G(x)⁻¹ v` in the Hessian metric of `g`.
pub fn metric_dual_norm_sq<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x: &DVector<T>,
    v: &DVector<T>,
) -> Result<T> {
    validate_point(p, x)?;
    let w = spd_solve(&p.g_hess(x), v)?;
    Ok(v.dot(&w))
}

/// Velocity of the continuous flow in primal coordinates, `−G(x)⁻¹∇f(x)`.
pub fn primal_velocity<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x: &DVector<T>,
) -> Result<DVector<T>> {
    let grad = f_grad(p, x)?;
    Ok(-spd_solve(&p.g_hess(x), &grad)?)
}
