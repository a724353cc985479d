//! Numerical certificates for the descent, rate and linearization results:
//! energy-identity residuals, rate constants, contraction factors, spectra and
//! metric-distortion bounds.

mod energy;
mod kl;
mod linearization;
mod metric;
mod rates;

pub use energy::{dissipation_sandwich, energy_residual, max_energy_residual, DissipationAudit};
pub use kl::{kl_exponent_diagnostic, KlDiagnostic, ValueGradientTrace};
pub use linearization::{
    check_local_exp_bound, linearize_at, local_exp_certificate, measure_local_contraction,
    LinearizationReport, LocalExpCertificate, LocalExpCheck,
};
pub use metric::{hessian_f_bounds_on_box, metric_bounds_on_box, pl_constant_conversion, MetricBounds};
pub use rates::{
    damped_pl_report, distance_rate_check, estimate_metric_pl_sigma, flow_rate_check, q_eta_bound,
    Certification, CheckMode, RateCheck, RateReport,
};

use crate::scalar::{lit, Scalar};

/// Value gaps at or below this level (relative to `max(1, |f⋆|)`) are treated
/// as rounding noise and excluded from ratio and regression estimates.
pub(crate) fn gap_floor<T: Scalar>(f_star: T) -> T {
    lit::<T>(1e-12) * f_star.abs().max(T::one())
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, a, R²)`.
pub(crate) fn linear_fit<T: Scalar>(pts: &[(T, T)]) -> (T, T, T) {
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    let syy = pts.iter().fold(T::zero(), |a, p| a + (p.1 - my) * (p.1 - my));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > T::zero() { sxy * sxy / (sxx * syy) } else { T::one() };
    (slope, intercept, r2)
}
