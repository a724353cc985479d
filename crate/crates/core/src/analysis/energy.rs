use super::MetricBounds;
use crate::dc_core::{f_grad, metric_dual_norm_sq, DcProblem};
use crate::error::{DcError, Result};
use crate::flow::{central_derivative, FlowTrace};
use crate::scalar::Scalar;

/// `|d/dt f(x(t_i)) + ∇f(x_i)ᵀ G(x_i)⁻¹ ∇f(x_i)|`, with the time derivative
/// taken by a three-point difference of the recorded values and the metric
/// term recomputed from the oracles.
pub fn energy_residual<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &FlowTrace<T>,
    i: usize,
) -> Result<T> {
    let len = trace.len();
    if i == 0 || i + 1 >= len {
        return Err(DcError::IndexOutOfRange { index: i, len });
    }
    let x = &trace.x_states[i];
    let grad = f_grad(p, x)?;
    let dissipation = metric_dual_norm_sq(p, x, &grad)?;
    Ok((central_derivative(&trace.times, &trace.f_values, i) + dissipation).abs())
}

/// Largest interior residual; zero for traces with fewer than three samples.
pub fn max_energy_residual<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &FlowTrace<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for i in 1..trace.len().saturating_sub(1) {
        worst = worst.max(energy_residual(p, trace, i)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationAudit<T: Scalar> {
    /// Interior samples inside the bounds' box.
    pub checked: usize,
    pub violations: usize,
    /// Smallest margin of `d/dt f + (1/m)‖∇f‖² ≥ 0`.
    pub worst_lower_margin: T,
    /// Smallest margin of `−(1/M)‖∇f‖² − d/dt f ≥ 0`.
    pub worst_upper_margin: T,
}

/// Checks `−(1/m)‖∇f‖² ≤ d/dt f ≤ −(1/M)‖∇f‖²` at every interior sample that
/// lies in the bounds' box, allowing `tol` for the finite difference.
pub fn dissipation_sandwich<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &FlowTrace<T>,
    bounds: &MetricBounds<T>,
    tol: T,
) -> Result<DissipationAudit<T>> {
    let big = T::max_value().unwrap_or_else(T::one);
    let mut audit = DissipationAudit {
        checked: 0,
        violations: 0,
        worst_lower_margin: big,
        worst_upper_margin: big,
    };
    for i in 1..trace.len().saturating_sub(1) {
        let x = &trace.x_states[i];
        if !bounds.region.contains(x, T::zero()) {
            continue;
        }
        let g2 = f_grad(p, x)?.norm_squared();
        let d = central_derivative(&trace.times, &trace.f_values, i);
        let lower = d + g2 / bounds.m;
        let upper = -g2 / bounds.big_m - d;
        audit.checked += 1;
        audit.worst_lower_margin = audit.worst_lower_margin.min(lower);
        audit.worst_upper_margin = audit.worst_upper_margin.min(upper);
        if lower < -tol || upper < -tol {
            audit.violations += 1;
        }
    }
    Ok(audit)
}
