use super::linear_fit;
use crate::error::{DcError, Result};
use crate::flow::FlowTrace;
use crate::scalar::{lit, Scalar};
use crate::schemes::IterateTrace;

const MIN_POINTS: usize = 10;

/// Anything that records objective values with matching gradient norms.
pub trait ValueGradientTrace<T: Scalar> {
    fn values(&self) -> &[T];
    fn grad_norms(&self) -> &[T];
}

impl<T: Scalar> ValueGradientTrace<T> for IterateTrace<T> {
    fn values(&self) -> &[T] {
        &self.f_values
    }
    fn grad_norms(&self) -> &[T] {
        &self.grad_norms
    }
}

impl<T: Scalar> ValueGradientTrace<T> for FlowTrace<T> {
    fn values(&self) -> &[T] {
        &self.f_values
    }
    fn grad_norms(&self) -> &[T] {
        &self.grad_norms
    }
}

/// Fitted power-type KL exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlDiagnostic<T: Scalar> {
    /// Slope of `ln ‖∇f‖` against `ln(f − f⋆)`.
    pub theta: T,
    pub r_squared: T,
    pub points: usize,
}

/// Estimates θ in `‖∇f‖ ≈ c (f − f⋆)^θ` by least squares over the last half
/// of the samples whose gap exceeds `1e-9·max(1, |f⋆|)`. Smaller gaps carry
/// too few significant digits to be useful.
pub fn kl_exponent_diagnostic<T: Scalar, R: ValueGradientTrace<T> + ?Sized>(
    trace: &R,
    f_star: T,
) -> Result<KlDiagnostic<T>> {
    let floor = lit::<T>(1e-9) * f_star.abs().max(T::one());
    let usable: Vec<(T, T)> = trace
        .values()
        .iter()
        .zip(trace.grad_norms())
        .map(|(&f, &g)| (f - f_star, g))
        .filter(|&(gap, g)| gap > floor && g > T::zero() && gap.is_finite() && g.is_finite())
        .map(|(gap, g)| (gap.ln(), g.ln()))
        .collect();
    let tail = &usable[usable.len() / 2..];
    if tail.len() < MIN_POINTS {
        return Err(DcError::InsufficientData { needed: MIN_POINTS, got: tail.len() });
    }
    let (theta, _, r_squared) = linear_fit(tail);
    Ok(KlDiagnostic { theta, r_squared, points: tail.len() })
}
