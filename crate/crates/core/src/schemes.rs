//! Classical and damped DCA, in primal form and as explicit Euler steps on the
//! dual coordinate `y = ∇g(x)`.

use nalgebra::DVector;

use crate::dc_core::{
    bregman_g, f_grad, f_value, invert_grad_g, t_map, validate_point, DcProblem, NewtonConfig,
};
use crate::error::{DcError, Result};
use crate::scalar::{lit, Scalar};

/// Increase of `f` beyond which a step is treated as a broken oracle or a
/// failed inversion rather than a property of the method.
const DESCENT_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig<T: Scalar> {
    /// Relaxation parameter η ∈ (0, 1]; η = 1 is classical DCA.
    pub eta: T,
    pub max_iter: usize,
    /// Stop once `‖∇f(x_k)‖ ≤ stop_grad_tol`.
    pub stop_grad_tol: T,
    pub newton: NewtonConfig<T>,
}

impl<T: Scalar> Default for SchemeConfig<T> {
    fn default() -> Self {
        Self {
            eta: T::one(),
            max_iter: 10_000,
            stop_grad_tol: lit(1e-8),
            newton: NewtonConfig::default(),
        }
    }
}

impl<T: Scalar> SchemeConfig<T> {
    pub fn with_eta(eta: T) -> Self {
        Self { eta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(DcError::InvalidInput(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.max_iter == 0 {
            return Err(DcError::InvalidInput("max_iter must be at least 1".into()));
        }
        if !(self.stop_grad_tol > T::zero()) {
            return Err(DcError::InvalidInput("stop_grad_tol must be positive".into()));
        }
        self.newton.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradTol,
    MaxIter,
    NumericError,
}

/// Logged discrete trajectory. `bregman_steps[k] = D_g(x_{k+1}, x_k)` and
/// `step_norms[k] = ‖x_{k+1} − x_k‖`, so both have one entry fewer than `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace<T: Scalar> {
    pub points: Vec<DVector<T>>,
    pub f_values: Vec<T>,
    pub grad_norms: Vec<T>,
    pub bregman_steps: Vec<T>,
    pub step_norms: Vec<T>,
    pub eta: T,
    pub mode: Mode,
    pub termination: Termination,
    /// Cause of a `NumericError` termination.
    pub failure: Option<DcError>,
}

impl<T: Scalar> IterateTrace<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iterations(&self) -> usize {
        self.step_norms.len()
    }

    pub fn last_point(&self) -> &DVector<T> {
        self.points.last().expect("trace holds at least the start point")
    }

    /// Largest `‖x_k‖` seen, reported so experiments can state whether the
    /// boundedness hypothesis held empirically.
    pub fn max_point_norm(&self) -> T {
        self.points.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }
}

/// Classical DCA: solve `∇g(x_{k+1}) = ∇h(x_k)`.
pub fn dca_step<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x_k: &DVector<T>,
    cfg: &SchemeConfig<T>,
) -> Result<DVector<T>> {
    validate_point(p, x_k)?;
    invert_grad_g(p, &p.h_grad(x_k), x_k, &cfg.newton)
}

/// Damped DCA: solve `∇g(x_{k+1}) = (1 − η)∇g(x_k) + η∇h(x_k)`.
pub fn damped_dca_step<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x_k: &DVector<T>,
    cfg: &SchemeConfig<T>,
) -> Result<DVector<T>> {
    cfg.validate()?;
    validate_point(p, x_k)?;
    let target = p.g_grad(x_k) * (T::one() - cfg.eta) + p.h_grad(x_k) * cfg.eta;
    invert_grad_g(p, &target, x_k, &cfg.newton)
}

/// `y_{k+1} = y_k + η (T(y_k) − y_k)`.
pub fn dual_euler_step<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    y_k: &DVector<T>,
    warm: &DVector<T>,
    cfg: &SchemeConfig<T>,
) -> Result<DVector<T>> {
    cfg.validate()?;
    let ty = t_map(p, y_k, warm, &cfg.newton)?;
    Ok(y_k + (ty - y_k) * cfg.eta)
}

/// Runs the damped scheme from `x0` until `‖∇f(x_k)‖ ≤ stop_grad_tol` or
/// `max_iter` steps. Failures after the start point end the trace with
/// [`Termination::NumericError`] instead of discarding it.
pub fn run_scheme<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x0: &DVector<T>,
    cfg: &SchemeConfig<T>,
    mode: Mode,
) -> Result<IterateTrace<T>> {
    cfg.validate()?;
    validate_point(p, x0)?;

    let mut trace = IterateTrace {
        points: Vec::new(),
        f_values: Vec::new(),
        grad_norms: Vec::new(),
        bregman_steps: Vec::new(),
        step_norms: Vec::new(),
        eta: cfg.eta,
        mode,
        termination: Termination::MaxIter,
        failure: None,
    };

    let mut x = x0.clone();
    let mut y = p.g_grad(&x);
    let mut fx = f_value(p, &x)?;
    let guard = lit::<T>(DESCENT_GUARD);

    for k in 0..=cfg.max_iter {
        let grad_norm = f_grad(p, &x)?.norm();
        trace.points.push(x.clone());
        trace.f_values.push(fx);
        trace.grad_norms.push(grad_norm);

        if grad_norm <= cfg.stop_grad_tol {
            trace.termination = Termination::GradTol;
            return Ok(trace);
        }
        if k == cfg.max_iter {
            break;
        }

        let step = match mode {
            Mode::Primal => damped_dca_step(p, &x, cfg).map(|next| (next, None)),
            Mode::Dual => {
                // T(y_k) = ∇h(x_k) since x_k is already the pullback of y_k.
                let y_next = &y + (p.h_grad(&x) - &y) * cfg.eta;
                invert_grad_g(p, &y_next, &x, &cfg.newton).map(|next| (next, Some(y_next)))
            }
        };
        let (x_next, y_next) = match step {
            Ok(s) => s,
            Err(e) => return Ok(fail(trace, e)),
        };
        if x_next.iter().any(|v| !v.is_finite()) {
            return Ok(fail(trace, DcError::NonFinite("iterate")));
        }
        let f_next = p.g_value(&x_next) - p.h_value(&x_next);
        if !f_next.is_finite() {
            return Ok(fail(trace, DcError::NonFinite("objective value")));
        }
        if f_next > fx + guard {
            return Ok(fail(
                trace,
                DcError::Numeric(format!("descent violated at iteration {k}: f rose from {fx} to {f_next}")),
            ));
        }

        trace.bregman_steps.push(bregman_g(p, &x_next, &x)?);
        trace.step_norms.push((&x_next - &x).norm());
        y = y_next.unwrap_or_else(|| p.g_grad(&x_next));
        x = x_next;
        fx = f_next;
    }

    trace.termination = Termination::MaxIter;
    Ok(trace)
}

fn fail<T: Scalar>(mut trace: IterateTrace<T>, e: DcError) -> IterateTrace<T> {
    trace.termination = Termination::NumericError;
    trace.failure = Some(e);
    trace
}

/// Per-iterate audit of the discrete descent inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentAudit<T: Scalar> {
    pub steps: usize,
    /// Violations of `f(x_{k+1}) + ((1−η)/η) D_g(x_{k+1}, x_k) ≤ f(x_k)`.
    pub relaxed_violations: usize,
    /// Violations of `f(x_k) − f(x_{k+1}) ≥ ((1−η)μ/2η)‖x_{k+1} − x_k‖²`.
    pub strong_violations: usize,
    /// Violations of plain monotonicity `f(x_{k+1}) ≤ f(x_k)`.
    pub monotone_violations: usize,
    /// Smallest slack-normalized margin of the relaxed inequality (≥ −1 passes).
    pub worst_relaxed_margin: T,
    /// `max_k |‖∇g(x_{k+1}) − ∇g(x_k)‖ − η‖∇f(x_k)‖|`.
    pub max_gradient_identity_residual: T,
}

impl<T: Scalar> DescentAudit<T> {
    pub fn passed(&self) -> bool {
        self.relaxed_violations == 0 && self.strong_violations == 0 && self.monotone_violations == 0
    }
}

/// Checks every step of `trace` against the descent certificates with slack
/// `slack_rel · (1 + |f(x_k)|)`. At η = 1 both certificates reduce to plain
/// monotonicity.
pub fn audit_descent<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    trace: &IterateTrace<T>,
    slack_rel: T,
) -> Result<DescentAudit<T>> {
    let eta = trace.eta;
    let weight = (T::one() - eta) / eta;
    let half = lit::<T>(0.5);
    let mut audit = DescentAudit {
        steps: trace.iterations(),
        relaxed_violations: 0,
        strong_violations: 0,
        monotone_violations: 0,
        worst_relaxed_margin: T::max_value().unwrap_or_else(T::one),
        max_gradient_identity_residual: T::zero(),
    };
    for k in 0..trace.iterations() {
        let (fk, fk1) = (trace.f_values[k], trace.f_values[k + 1]);
        let slack = slack_rel * (T::one() + fk.abs());
        let relaxed_gap = fk - fk1 - weight * trace.bregman_steps[k];
        let strong_gap = fk - fk1 - weight * half * p.mu() * trace.step_norms[k].powi(2);
        audit.worst_relaxed_margin = audit.worst_relaxed_margin.min(relaxed_gap / slack);
        if relaxed_gap < -slack {
            audit.relaxed_violations += 1;
        }
        if strong_gap < -slack {
            audit.strong_violations += 1;
        }
        if fk1 > fk + slack {
            audit.monotone_violations += 1;
        }
        let (xk, xk1) = (&trace.points[k], &trace.points[k + 1]);
        let lhs = (p.g_grad(xk1) - p.g_grad(xk)).norm();
        let rhs = eta * trace.grad_norms[k];
        audit.max_gradient_identity_residual = audit.max_gradient_identity_residual.max((lhs - rhs).abs());
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_double_well, make_quadratic};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn canonical() -> crate::problems::QuadraticDc<f64> {
        make_quadratic(DMatrix::identity(2, 2) * 2.0, DMatrix::identity(2, 2)).unwrap()
    }

    /// Bisection root of `x³ + x − 4` on [0, 2], independent of Newton.
    fn bisect_cubic() -> f64 {
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.powi(3) + mid - 4.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn dca_step_examples() {
        let p = canonical();
        let cfg = SchemeConfig::default();
        assert_relative_eq!(dca_step(&p, &v(&[2.0, 2.0]), &cfg).unwrap(), v(&[1.0, 1.0]), epsilon = 1e-12);
        assert_relative_eq!(dca_step(&p, &v(&[0.0, 0.0]), &cfg).unwrap(), v(&[0.0, 0.0]));

        let dw = make_double_well(v(&[1.0])).unwrap();
        let root = bisect_cubic();
        assert_relative_eq!(root, 1.3787967001295514, epsilon = 1e-12);
        assert_relative_eq!(dca_step(&dw, &v(&[2.0]), &cfg).unwrap()[0], root, epsilon = 1e-10);
    }

    #[test]
    fn damped_step_examples() {
        let p = canonical();
        let half = SchemeConfig::with_eta(0.5);
        assert_relative_eq!(damped_dca_step(&p, &v(&[2.0, 2.0]), &half).unwrap(), v(&[1.5, 1.5]), epsilon = 1e-12);

        let dw = make_double_well(v(&[1.0, 4.0])).unwrap();
        let x = v(&[0.3, -1.7]);
        let full = SchemeConfig::with_eta(1.0);
        assert_relative_eq!(
            damped_dca_step(&dw, &x, &full).unwrap(),
            dca_step(&dw, &x, &full).unwrap(),
            epsilon = 1e-12
        );
        for eta in [0.1, 0.5, 1.0] {
            let star = v(&[1.0, -1.0]);
            assert_relative_eq!(damped_dca_step(&dw, &star, &SchemeConfig::with_eta(eta)).unwrap(), star, epsilon = 1e-12);
        }
    }

    #[test]
    fn dual_euler_examples() {
        let p = canonical();
        let cfg = SchemeConfig::with_eta(1.0);
        assert_relative_eq!(
            dual_euler_step(&p, &v(&[2.0, 2.0]), &v(&[0.0, 0.0]), &cfg).unwrap(),
            v(&[1.0, 1.0]),
            epsilon = 1e-12
        );
        let dw = make_double_well(v(&[1.0, 1.0])).unwrap();
        let y_star = v(&[2.0, 2.0]);
        assert_relative_eq!(dual_euler_step(&dw, &y_star, &v(&[1.0, 1.0]), &cfg).unwrap(), y_star, epsilon = 1e-12);

        let x = v(&[0.4, -0.9]);
        let damped = SchemeConfig::with_eta(0.3);
        let lhs = dw.g_grad(&damped_dca_step(&dw, &x, &damped).unwrap());
        let rhs = dual_euler_step(&dw, &dw.g_grad(&x), &x, &damped).unwrap();
        assert!((lhs - rhs).amax() <= 10.0 * 1e-10);
    }

    #[test]
    fn eta_out_of_range_rejected() {
        let p = canonical();
        for eta in [0.0, 1.5, f64::NAN] {
            assert!(damped_dca_step(&p, &v(&[1.0, 1.0]), &SchemeConfig::with_eta(eta)).is_err());
        }
    }

    #[test]
    fn double_well_converges_to_well() {
        let p = make_double_well(v(&[1.0, 1.0])).unwrap();
        let cfg = SchemeConfig::with_eta(0.5);
        for mode in [Mode::Primal, Mode::Dual] {
            let tr = run_scheme(&p, &v(&[0.5, 0.7]), &cfg, mode).unwrap();
            assert_eq!(tr.termination, Termination::GradTol);
            assert_relative_eq!(tr.last_point(), &v(&[1.0, 1.0]), epsilon = 1e-7);
            assert!(tr.f_values.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(tr.bregman_steps.len() + 1, tr.points.len());
            let audit = audit_descent(&p, &tr, 1e-9).unwrap();
            assert!(audit.passed(), "{audit:?}");
            assert!(audit.max_gradient_identity_residual <= 1e-9);
        }
    }

    #[test]
    fn critical_start_stops_immediately() {
        let p = make_double_well(v(&[1.0, 1.0])).unwrap();
        let tr = run_scheme(&p, &v(&[1.0, -1.0]), &SchemeConfig::with_eta(0.5), Mode::Primal).unwrap();
        assert_eq!(tr.termination, Termination::GradTol);
        assert_eq!(tr.len(), 1);
        assert!(tr.bregman_steps.is_empty());
    }

    #[test]
    fn quadratic_values_decay_geometrically() {
        let p = canonical();
        let eta = 0.4;
        let tr = run_scheme(&p, &v(&[1.0, -2.0]), &SchemeConfig::with_eta(eta), Mode::Primal).unwrap();
        let ratio = (1.0 - eta / 2.0f64).powi(2);
        for w in tr.f_values.windows(2).take(30) {
            assert_relative_eq!(w[1] / w[0], ratio, epsilon = 1e-9);
        }
    }

    #[test]
    fn max_iter_termination() {
        let p = canonical();
        let cfg = SchemeConfig { max_iter: 3, ..SchemeConfig::with_eta(0.1) };
        let tr = run_scheme(&p, &v(&[1.0, 1.0]), &cfg, Mode::Dual).unwrap();
        assert_eq!(tr.termination, Termination::MaxIter);
        assert_eq!(tr.iterations(), 3);
    }

    #[test]
    fn failed_inversion_ends_trace() {
        let p = make_double_well(v(&[1.0])).unwrap();
        let cfg = SchemeConfig {
            newton: NewtonConfig { max_iter: 1, ..NewtonConfig::default() },
            ..SchemeConfig::with_eta(1.0)
        };
        let tr = run_scheme(&p, &v(&[30.0]), &cfg, Mode::Primal).unwrap();
        assert_eq!(tr.termination, Termination::NumericError);
        assert!(matches!(tr.failure, Some(DcError::Convergence { .. })));
        assert_eq!(tr.len(), 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = canonical();
        assert!(matches!(
            run_scheme(&p, &v(&[1.0]), &SchemeConfig::default(), Mode::Primal),
            Err(DcError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn single_precision_scheme() {
        let p = make_quadratic(DMatrix::<f32>::identity(2, 2) * 2.0, DMatrix::identity(2, 2)).unwrap();
        let cfg = SchemeConfig { stop_grad_tol: 1e-4f32, ..SchemeConfig::with_eta(0.5f32) };
        let tr = run_scheme(&p, &DVector::from_vec(vec![1.0f32, -1.0]), &cfg, Mode::Dual).unwrap();
        assert_eq!(tr.termination, Termination::GradTol);
        assert!(tr.last_point().norm() < 1e-3);
    }
}
