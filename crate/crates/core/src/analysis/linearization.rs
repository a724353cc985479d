use super::metric::{hessian_f_bounds_on_box, metric_bounds_on_box};
use crate::dc_core::{f_grad, f_hess, primal_velocity, validate_point, DcProblem, NewtonConfig};
use crate::error::{DcError, Result};
use crate::flow::FlowTrace;
use crate::linalg::{frobenius, generalized_eigenvalues, spd_inv_sqrt, sym_eigen, symmetrized_pencil};
use crate::region::BoxRegion;
use crate::scalar::{lit, Scalar};
use crate::schemes::{damped_dca_step, SchemeConfig};
use nalgebra::{DMatrix, DVector};

const CRITICAL_TOL: f64 = 1e-8;
const BOX_SAMPLES: usize = 64;

/// Linearized flow and damped-scheme data at a nondegenerate minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationReport<T: Scalar> {
    pub x_star: DVector<T>,
    pub h_f: DMatrix<T>,
    pub g_star: DMatrix<T>,
    /// Eigenvalues of `G⋆⁻¹H_f`, ascending.
    pub spectrum: DVector<T>,
    pub lambda_min: T,
    /// Central-difference Jacobian of `x ↦ −G(x)⁻¹∇f(x)` at `x⋆`.
    pub fd_jacobian: DMatrix<T>,
    /// `‖fd_jacobian + G⋆⁻¹H_f‖_F`.
    pub fd_error: T,
    pub fd_step: T,
}

impl<T: Scalar> LinearizationReport<T> {
    /// Predicted contraction factor `1 − η λ_min` of damped DCA near `x⋆`.
    pub fn local_factor(&self, eta: T) -> T {
        T::one() - eta * self.lambda_min
    }

    pub fn local_factor_table(&self, etas: &[T]) -> Vec<(T, T)> {
        etas.iter().map(|&e| (e, self.local_factor(e))).collect()
    }

    /// Finite-difference Jacobian within `100 h²` of the analytic one.
    pub fn fd_consistent(&self) -> bool {
        self.fd_error <= lit::<T>(100.0) * self.fd_step * self.fd_step
    }

    pub fn spectrum_in_unit_interval(&self) -> bool {
        self.spectrum.iter().all(|&s| s > T::zero() && s <= T::one() + lit::<T>(1e3) * T::machine_eps())
    }
}

fn require_minimum<T: Scalar, P: DcProblem<T> + ?Sized>(p: &P, x_star: &DVector<T>) -> Result<DMatrix<T>> {
    validate_point(p, x_star)?;
    let grad_norm = f_grad(p, x_star)?.norm();
    if !(grad_norm <= lit(CRITICAL_TOL)) {
        return Err(DcError::InvalidInput(format!("point is not critical: |grad f| = {:e}", grad_norm.as_f64())));
    }
    let h_f = f_hess(p, x_star)?;
    let (lo, _) = sym_eigen(&h_f);
    if !(lo[0] > T::zero()) {
        return Err(DcError::IndefiniteHessian(format!("lambda_min(Hess f) = {:e}", lo[0].as_f64())));
    }
    Ok(h_f)
}

/// Linearizes the flow at a critical point with `H_f ≻ 0`.
pub fn linearize_at<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x_star: &DVector<T>,
    fd_step: T,
) -> Result<LinearizationReport<T>> {
    if !(fd_step > T::zero()) {
        return Err(DcError::InvalidInput("fd_step must be positive".into()));
    }
    let h_f = require_minimum(p, x_star)?;
    let g_star = p.g_hess(x_star);
    let spectrum = generalized_eigenvalues(&h_f, &g_star)?;

    let n = p.dim();
    let mut fd_jacobian = DMatrix::zeros(n, n);
    let two_h = lit::<T>(2.0) * fd_step;
    for j in 0..n {
        let mut plus = x_star.clone();
        let mut minus = x_star.clone();
        plus[j] += fd_step;
        minus[j] -= fd_step;
        let col = (primal_velocity(p, &plus)? - primal_velocity(p, &minus)?) / two_h;
        fd_jacobian.set_column(j, &col);
    }
    let chol = g_star
        .clone()
        .cholesky()
        .ok_or_else(|| DcError::Numeric("Hess g is not positive definite".into()))?;
    let analytic = chol.solve(&h_f);
    let fd_error = frobenius(&(&fd_jacobian + &analytic));

    Ok(LinearizationReport {
        x_star: x_star.clone(),
        lambda_min: spectrum[0],
        h_f,
        g_star,
        spectrum,
        fd_jacobian,
        fd_error,
        fd_step,
    })
}

/// Runs damped DCA from `x⋆ + radius·v`, with `v` the slowest mode of
/// `G⋆⁻¹H_f`, and returns the geometric mean of the distance ratios over the
/// last half of the steps. Iteration stops early once the distance falls
/// below `1e-4·radius`, where Newton tolerance starts to dominate.
pub fn measure_local_contraction<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x_star: &DVector<T>,
    eta: T,
    radius: T,
    n_steps: usize,
) -> Result<T> {
    if !(radius > T::zero()) {
        return Err(DcError::InvalidInput("radius must be positive".into()));
    }
    if n_steps < 2 {
        return Err(DcError::InsufficientData { needed: 2, got: n_steps });
    }
    let h_f = require_minimum(p, x_star)?;
    let g_star = p.g_hess(x_star);
    let (_, vecs) = sym_eigen(&symmetrized_pencil(&h_f, &g_star)?);
    let mut dir = spd_inv_sqrt(&g_star, "metric")? * vecs.column(0);
    dir /= dir.norm();

    let tol = (radius * lit(1e-9)).max(lit::<T>(1e3) * T::machine_eps());
    let cfg = SchemeConfig { eta, newton: NewtonConfig::default().with_tol(tol), ..SchemeConfig::default() };
    cfg.validate()?;

    let limit = radius * lit(10.0);
    let stop = radius * lit(1e-4);
    let mut x = x_star + dir * radius;
    let mut dist = radius;
    let mut ratios = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let next = damped_dca_step(p, &x, &cfg)?;
        let d = (&next - x_star).norm();
        if d > limit {
            return Err(DcError::LocalityViolated { distance: d.as_f64(), limit: limit.as_f64() });
        }
        ratios.push(d / dist);
        x = next;
        dist = d;
        if dist < stop || dist == T::zero() {
            break;
        }
    }
    let tail = &ratios[ratios.len() / 2..];
    if tail.iter().any(|&r| r == T::zero()) {
        return Ok(T::zero());
    }
    let n = T::from_usize_lossy(tail.len());
    Ok((tail.iter().fold(T::zero(), |a, &r| a + r.ln()) / n).exp())
}

/// Constants of the local exponential bound
/// `‖x(t) − x⋆‖ ≤ c1 e^{−λt} ‖x(0) − x⋆‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExpCertificate<T: Scalar> {
    pub lambda: T,
    pub c1: T,
    pub m_f: T,
    pub l_f: T,
    pub big_m: T,
}

/// `λ = m_f / M`, `c1 = sqrt(L_f / m_f)` with `m_f, L_f` the sampled extremes
/// of `∇²f` over the box and `M` from [`metric_bounds_on_box`].
pub fn local_exp_certificate<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x_star: &DVector<T>,
    region: &BoxRegion<T>,
) -> Result<LocalExpCertificate<T>> {
    require_minimum(p, x_star)?;
    if !region.contains(x_star, T::zero()) {
        return Err(DcError::InvalidInput("box does not contain the critical point".into()));
    }
    let (m_f, l_f) = hessian_f_bounds_on_box(p, region, BOX_SAMPLES)?;
    if !(m_f > T::zero()) {
        return Err(DcError::IndefiniteHessian(format!(
            "Hess f reaches {:e} on the box; shrink it",
            m_f.as_f64()
        )));
    }
    let big_m = metric_bounds_on_box(p, region, BOX_SAMPLES)?.big_m;
    Ok(LocalExpCertificate { lambda: m_f / big_m, c1: (l_f / m_f).sqrt(), m_f, l_f, big_m })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExpCheck<T: Scalar> {
    pub passed: bool,
    /// Smallest `(bound − dist) / bound` along the trace.
    pub worst_margin: T,
    pub samples: usize,
}

/// Checks a flow trace against the certificate with multiplicative slack.
pub fn check_local_exp_bound<T: Scalar>(
    cert: &LocalExpCertificate<T>,
    x_star: &DVector<T>,
    trace: &FlowTrace<T>,
    slack: T,
) -> Result<LocalExpCheck<T>> {
    if trace.is_empty() {
        return Err(DcError::InsufficientData { needed: 1, got: 0 });
    }
    let d0 = (&trace.x_states[0] - x_star).norm();
    let floor = lit::<T>(1e-12) * x_star.norm().max(T::one());
    let mut passed = true;
    let mut worst = T::max_value().unwrap_or_else(T::one);
    for (&t, x) in trace.times.iter().zip(&trace.x_states) {
        let d = (x - x_star).norm();
        let bound = cert.c1 * (-cert.lambda * t).exp() * d0 * (T::one() + slack) + floor;
        if d > bound {
            passed = false;
        }
        worst = worst.min((bound - d) / bound);
    }
    Ok(LocalExpCheck { passed, worst_margin: worst, samples: trace.len() })
}
