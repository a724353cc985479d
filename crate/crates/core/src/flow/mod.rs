//! The continuous DCA flow `G(x)ẋ = −∇f(x)`, integrated in the dual
//! coordinate `y = ∇g(x)` as `ẏ = T(y) − y`.

mod closed_form;
mod refinement;
mod rk45;

use nalgebra::DVector;

use crate::dc_core::{
    f_grad, f_value, invert_grad_g, metric_dual_norm_sq, validate_point, DcProblem, NewtonConfig,
};
use crate::error::{DcError, Result};
use crate::scalar::{lit, Scalar};

pub use closed_form::closed_form_linear_flow;
pub use refinement::{
    euler_interpolant_deviation, euler_refinement_study, log_log_slope, RefinementRow,
};
pub use rk45::{Advance, AutonomousField, Dopri5, Rk45Options, Rk45Stats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig<T: Scalar> {
    pub t_end: T,
    pub step_init: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub newton: NewtonConfig<T>,
    /// Spacing of the recorded samples in `t`.
    pub record_stride: T,
    /// Integration stops once `‖∇f(x(t))‖` falls to this level.
    pub equilibrium_tol: T,
    /// Smallest admissible controller step before reporting stiffness.
    pub min_step: T,
}

impl<T: Scalar> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            t_end: lit(10.0),
            step_init: lit(1e-2),
            rel_tol: lit(1e-8),
            abs_tol: lit(1e-10),
            newton: NewtonConfig::default(),
            record_stride: lit(1e-2),
            equilibrium_tol: lit(1e-10),
            min_step: lit(1e-14),
        }
    }
}

impl<T: Scalar> FlowConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.t_end) || !pos(self.step_init) || !pos(self.record_stride) {
            return Err(DcError::InvalidInput("t_end, step_init and record_stride must be positive".into()));
        }
        if !pos(self.rel_tol) || !pos(self.abs_tol) {
            return Err(DcError::InvalidInput("rel_tol and abs_tol must be positive".into()));
        }
        if self.record_stride > self.t_end {
            return Err(DcError::InvalidInput("record_stride must not exceed t_end".into()));
        }
        if self.equilibrium_tol < T::zero() || !pos(self.min_step) {
            return Err(DcError::InvalidInput("equilibrium_tol and min_step must be nonnegative/positive".into()));
        }
        self.newton.validate()
    }

    fn rk_options(&self) -> Rk45Options<T> {
        Rk45Options {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            step_init: self.step_init,
            min_step: self.min_step,
            ..Rk45Options::default()
        }
    }

    /// `0, s, 2s, …` up to `t_end`, with `t_end` appended when it is off the grid.
    pub fn record_times(&self) -> Vec<T> {
        let stride = self.record_stride;
        let n = (self.t_end / stride + lit(1e-9)).floor().to_usize().unwrap_or(0);
        let mut times: Vec<T> = (0..=n).map(|k| T::from_usize_lossy(k) * stride).collect();
        let last = *times.last().expect("at least t = 0");
        if self.t_end - last > stride * lit(1e-9) {
            times.push(self.t_end);
        }
        times
    }
}

/// Sampled continuous trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace<T: Scalar> {
    pub times: Vec<T>,
    pub y_states: Vec<DVector<T>>,
    pub x_states: Vec<DVector<T>>,
    pub f_values: Vec<T>,
    pub grad_norms: Vec<T>,
    /// `‖ẋ‖²_G = ∇fᵀG⁻¹∇f` at each sample.
    pub metric_speed_sq: Vec<T>,
    /// `|d/dt f + ∇fᵀG⁻¹∇f|` at interior samples; `None` at both ends.
    pub energy_residuals: Vec<Option<T>>,
    /// Time at which the equilibrium test stopped integration. Samples after
    /// it repeat the frozen state.
    pub halted_at: Option<T>,
    pub stats: Rk45Stats,
}

impl<T: Scalar> FlowTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_y_norm(&self) -> T {
        self.y_states.iter().fold(T::zero(), |m, y| m.max(y.norm()))
    }

    pub fn last_x(&self) -> &DVector<T> {
        self.x_states.last().expect("trace is non-empty")
    }

    /// Primal state at time `t` by linear interpolation between samples.
    pub fn x_at(&self, t: T) -> DVector<T> {
        interpolate(&self.times, &self.x_states, t)
    }
}

pub(crate) fn interpolate<T: Scalar>(times: &[T], states: &[DVector<T>], t: T) -> DVector<T> {
    let idx = times.partition_point(|&s| s <= t);
    if idx == 0 {
        return states[0].clone();
    }
    if idx >= times.len() {
        return states[times.len() - 1].clone();
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    let w = (t - t0) / (t1 - t0);
    &states[idx - 1] * (T::one() - w) + &states[idx] * w
}

/// Derivative at interior index `i` of the polynomial through up to five
/// neighbouring samples (centered when possible, shifted near the ends), so
/// fourth order on smooth data. Works on non-uniform grids and returns
/// exactly zero on constant data.
pub(crate) fn central_derivative<T: Scalar>(times: &[T], values: &[T], i: usize) -> T {
    let n = times.len();
    let width = n.min(5);
    let start = i.saturating_sub(width / 2).min(n - width);
    let nodes = start..start + width;
    let ti = times[i];
    let mut acc = T::zero();
    for j in nodes.clone().filter(|&j| j != i) {
        let mut num = T::one();
        let mut den = T::one();
        for k in nodes.clone().filter(|&k| k != j) {
            den *= times[j] - times[k];
            if k != i {
                num *= ti - times[k];
            }
        }
        acc += num / den * (values[j] - values[i]);
    }
    acc
}

/// The dual field `y ↦ T(y) − y` with warm-started inversions.
pub struct DualField<'a, T: Scalar, P: DcProblem<T> + ?Sized> {
    problem: &'a P,
    newton: NewtonConfig<T>,
    warm: DVector<T>,
}

impl<'a, T: Scalar, P: DcProblem<T> + ?Sized> DualField<'a, T, P> {
    pub fn new(problem: &'a P, warm: DVector<T>, newton: NewtonConfig<T>) -> Self {
        Self { problem, newton, warm }
    }

    /// `(∇g)⁻¹(y)`, warm-started from the previous pullback.
    pub fn pullback(&mut self, y: &DVector<T>) -> Result<DVector<T>> {
        let x = invert_grad_g(self.problem, y, &self.warm, &self.newton)?;
        self.warm.copy_from(&x);
        Ok(x)
    }
}

impl<T: Scalar, P: DcProblem<T> + ?Sized> AutonomousField<T> for DualField<'_, T, P> {
    fn eval(&mut self, y: &DVector<T>) -> Result<DVector<T>> {
        let x = self.pullback(y)?;
        Ok(self.problem.h_grad(&x) - y)
    }
}

/// `T(y) − y`, equal in value to `−∇f((∇g)⁻¹(y))`.
pub fn dual_vector_field<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    y: &DVector<T>,
    warm: &DVector<T>,
    cfg: &NewtonConfig<T>,
) -> Result<DVector<T>> {
    validate_point(p, y)?;
    DualField::new(p, warm.clone(), *cfg).eval(y)
}

/// Integrates the dual ODE from `y0 = ∇g(x0)` with Dormand–Prince 5(4),
/// recording samples every `record_stride` and pulling each back to `x(t)`.
pub fn integrate_flow<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x0: &DVector<T>,
    cfg: &FlowConfig<T>,
) -> Result<FlowTrace<T>> {
    cfg.validate()?;
    validate_point(p, x0)?;

    let record_times = cfg.record_times();
    let mut field = DualField::new(p, x0.clone(), cfg.newton);
    let y0 = p.g_grad(x0);
    let mut ode = Dopri5::new(&mut field, y0, cfg.rk_options())?;

    let mut trace = FlowTrace {
        times: Vec::with_capacity(record_times.len()),
        y_states: Vec::with_capacity(record_times.len()),
        x_states: Vec::with_capacity(record_times.len()),
        f_values: Vec::with_capacity(record_times.len()),
        grad_norms: Vec::with_capacity(record_times.len()),
        metric_speed_sq: Vec::with_capacity(record_times.len()),
        energy_residuals: Vec::new(),
        halted_at: None,
        stats: Rk45Stats::default(),
    };

    let mut frozen: Option<(DVector<T>, DVector<T>)> = None;
    for (idx, &t) in record_times.iter().enumerate() {
        let (y, x) = match &frozen {
            Some(state) => state.clone(),
            None => {
                let y = if idx == 0 {
                    ode.y().clone()
                } else {
                    let status = ode.advance_to(&mut field, t, Some(cfg.equilibrium_tol))?;
                    if status == Advance::Halted {
                        trace.halted_at = Some(ode.t());
                    }
                    ode.y().clone()
                };
                let x = if idx == 0 { x0.clone() } else { field.pullback(&y)? };
                if trace.halted_at.is_some() || (idx == 0 && f_grad(p, x0)?.norm() <= cfg.equilibrium_tol) {
                    trace.halted_at.get_or_insert(T::zero());
                    frozen = Some((y.clone(), x.clone()));
                }
                (y, x)
            }
        };
        let grad = f_grad(p, &x)?;
        trace.times.push(t);
        trace.f_values.push(f_value(p, &x)?);
        trace.grad_norms.push(grad.norm());
        trace.metric_speed_sq.push(metric_dual_norm_sq(p, &x, &grad)?);
        trace.y_states.push(y);
        trace.x_states.push(x);
    }

    let n = trace.len();
    trace.energy_residuals = (0..n)
        .map(|i| {
            (i > 0 && i + 1 < n).then(|| {
                (central_derivative(&trace.times, &trace.f_values, i) + trace.metric_speed_sq[i]).abs()
            })
        })
        .collect();
    trace.stats = ode.stats();
    Ok(trace)
}
