use super::{gap_floor, linear_fit};
use crate::dc_core::{f_grad, f_value, metric_dual_norm_sq, DcProblem};
use crate::error::{DcError, Result};
use crate::flow::FlowTrace;
use crate::region::BoxRegion;
use crate::scalar::{lit, Scalar};
use crate::schemes::IterateTrace;

/// Where a rate constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certification {
    /// Derived in closed form for the instance.
    Analytic,
    /// Estimated from samples; not a proof.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Refuse uncertified constants.
    Certify,
    /// Evaluate anyway and report.
    ReportOnly,
}

/// `max{0, 1 − (μσ/L_g) η(1 − η)}`.
pub fn q_eta_bound<T: Scalar>(mu: T, sigma: T, lg: T, eta: T) -> T {
    (T::one() - mu * sigma / lg * eta * (T::one() - eta)).max(T::zero())
}

/// Global linear-rate constants for damped DCA next to their measured
/// counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T: Scalar> {
    pub eta: T,
    pub mu: T,
    pub sigma: T,
    pub lg: T,
    pub q_eta_bound: T,
    /// Geometric mean of `(f(x_{k+1}) − f⋆)/(f(x_k) − f⋆)` over the last half
    /// of the usable steps.
    pub measured_ratio_geomean: T,
    pub max_step_ratio: T,
    pub step_ratios: Vec<T>,
    /// Steps whose ratio exceeds `q_eta_bound + 1e-9`.
    pub violations: usize,
    /// Flow decay constant `c² = 2σ`.
    pub c_sq: T,
    pub theta: T,
    pub certification: Certification,
}

impl<T: Scalar> RateReport<T> {
    /// No step exceeded the bound. Always `true` for empirical reports, which
    /// only describe.
    pub fn passed(&self) -> bool {
        self.certification == Certification::Empirical || self.violations == 0
    }
}

/// Compares the per-step value ratios of a damped DCA trace against `q_η`.
pub fn damped_pl_report<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &IterateTrace<T>,
    sigma: T,
    lg: T,
    f_star: T,
    certification: Certification,
) -> Result<RateReport<T>> {
    let eta = trace.eta;
    if !(eta > T::zero() && eta < T::one()) {
        return Err(DcError::InvalidInput("the damped rate needs eta in (0, 1)".into()));
    }
    if !(sigma > T::zero() && lg > T::zero()) {
        return Err(DcError::InvalidInput("sigma and lg must be positive".into()));
    }
    let floor = gap_floor(f_star);
    let gaps: Vec<T> = trace.f_values.iter().map(|&f| f - f_star).collect();
    if gaps.first().is_none_or(|&g| g <= floor) {
        return Err(DcError::Degenerate("trace starts at the optimal value".into()));
    }

    let mu = p.mu();
    let q = q_eta_bound(mu, sigma, lg, eta);
    let tol = lit::<T>(1e-9);
    let step_ratios: Vec<T> = gaps
        .windows(2)
        .take_while(|w| w[0] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    let violations = step_ratios.iter().filter(|&&r| r > q + tol).count();
    let max_step_ratio = step_ratios.iter().fold(T::min_value().unwrap_or_else(T::zero), |m, &r| m.max(r));

    let tail = &step_ratios[step_ratios.len() / 2..];
    let positive: Vec<T> = tail.iter().copied().filter(|&r| r > T::zero()).collect();
    let measured_ratio_geomean = if positive.is_empty() {
        T::zero()
    } else {
        let n = T::from_usize_lossy(positive.len());
        (positive.iter().fold(T::zero(), |a, &r| a + r.ln()) / n).exp()
    };

    Ok(RateReport {
        eta,
        mu,
        sigma,
        lg,
        q_eta_bound: q,
        measured_ratio_geomean,
        max_step_ratio,
        step_ratios,
        violations,
        c_sq: lit::<T>(2.0) * sigma,
        theta: lit(0.5),
        certification,
    })
}

/// Outcome of an envelope check along a flow trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCheck<T: Scalar> {
    pub passed: bool,
    /// `min_i (bound_i − V_i) / max(bound_i, tiny)`: negative means violated.
    pub worst_margin: T,
    /// For exponential envelopes, `−slope` of `ln V(t)` fitted over samples
    /// with `V > 1e-12 V(0)`.
    pub measured_decay: Option<T>,
    pub samples: usize,
    pub certification: Certification,
}

/// Checks the metric relative-error envelopes along a flow trace:
/// `V(t) ≤ e^{−c²t} V(0)` for θ = ½ and
/// `V(t) ≤ (V(0)^{1−2θ} + c²(2θ−1)t)^{−1/(2θ−1)}` for θ ∈ (½, 1),
/// with multiplicative slack `1 + 1e-6`.
pub fn flow_rate_check<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &FlowTrace<T>,
    c: T,
    theta: T,
    f_star: T,
    certification: Certification,
    mode: CheckMode,
) -> Result<RateCheck<T>> {
    if !(c > T::zero()) {
        return Err(DcError::InvalidInput("c must be positive".into()));
    }
    let half = lit::<T>(0.5);
    if !(theta >= half && theta < T::one()) {
        return Err(DcError::InvalidInput("theta must lie in [1/2, 1)".into()));
    }
    if certification == Certification::Empirical && mode == CheckMode::Certify {
        return Err(DcError::Uncertified("empirical rate constants cannot be certified".into()));
    }
    if trace.is_empty() {
        return Err(DcError::InsufficientData { needed: 1, got: 0 });
    }
    if trace.x_states[0].len() != p.dim() {
        return Err(DcError::DimensionMismatch { expected: p.dim(), got: trace.x_states[0].len() });
    }

    let c2 = c * c;
    let slack = T::one() + lit(1e-6);
    let tiny = T::machine_eps() * T::machine_eps();
    let v0 = (trace.f_values[0] - f_star).max(T::zero());
    let mut worst = T::max_value().unwrap_or_else(T::one);
    let mut passed = true;
    for (&t, &f) in trace.times.iter().zip(&trace.f_values) {
        let v = f - f_star;
        let bound = if v0 == T::zero() {
            T::zero()
        } else if theta == half {
            (-c2 * t).exp() * v0
        } else {
            let two_theta_m1 = lit::<T>(2.0) * theta - T::one();
            (v0.powf(-two_theta_m1) + c2 * two_theta_m1 * t).powf(-T::one() / two_theta_m1)
        };
        let allowed = bound * slack + gap_floor(f_star) * lit(1e-3);
        if v > allowed {
            passed = false;
        }
        worst = worst.min((allowed - v) / allowed.max(tiny));
    }

    let measured_decay = if theta == half && v0 > T::zero() {
        let pts: Vec<(T, T)> = trace
            .times
            .iter()
            .zip(&trace.f_values)
            .map(|(&t, &f)| (t, f - f_star))
            .filter(|&(_, v)| v > v0 * lit(1e-12))
            .map(|(t, v)| (t, v.ln()))
            .collect();
        (pts.len() >= 2).then(|| -linear_fit(&pts).0)
    } else {
        None
    };

    Ok(RateCheck { passed, worst_margin: worst, measured_decay, samples: trace.len(), certification })
}

/// Checks `dist(x(t), X⋆) ≤ sqrt(2/α) V(t)^{1/2}` at every sample.
pub fn distance_rate_check<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &FlowTrace<T>,
    alpha: T,
    f_star: T,
) -> Result<RateCheck<T>> {
    if !(alpha > T::zero()) {
        return Err(DcError::InvalidInput("alpha must be positive".into()));
    }
    let two = lit::<T>(2.0);
    let tiny = T::machine_eps() * T::machine_eps();
    let mut worst = T::max_value().unwrap_or_else(T::one);
    let mut passed = true;
    for (x, &f) in trace.x_states.iter().zip(&trace.f_values) {
        let dist = p
            .dist_to_minimizers(x)
            .ok_or_else(|| DcError::Uncertified("minimizer set is not known in closed form".into()))?;
        let v = (f - f_star).max(T::zero());
        let bound = (two / alpha * v).sqrt() * (T::one() + lit(1e-9)) + lit::<T>(1e-12);
        if dist > bound {
            passed = false;
        }
        worst = worst.min((bound - dist) / bound.max(tiny));
    }
    Ok(RateCheck {
        passed,
        worst_margin: worst,
        measured_decay: None,
        samples: trace.len(),
        certification: Certification::Analytic,
    })
}

/// Sampled infimum of `‖∇f‖²_{G⁻¹} / (2(f − f⋆))` over the box, skipping
/// points within rounding of the optimal value.
pub fn estimate_metric_pl_sigma<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    region: &BoxRegion<T>,
    f_star: T,
    n_samples: usize,
) -> Result<T> {
    let floor = gap_floor(f_star) * lit(1e3);
    let mut best: Option<T> = None;
    for x in region.low_discrepancy_samples(n_samples) {
        let gap = f_value(p, &x)? - f_star;
        if gap <= floor {
            continue;
        }
        let grad = f_grad(p, &x)?;
        let ratio = metric_dual_norm_sq(p, &x, &grad)? / (lit::<T>(2.0) * gap);
        best = Some(best.map_or(ratio, |b: T| b.min(ratio)));
    }
    best.ok_or(DcError::InsufficientData { needed: 1, got: 0 })
}
