//! Dormand–Prince 5(4) integrator with PI step-size control for autonomous
//! systems `ẏ = F(y)`.

use nalgebra::DVector;

use crate::error::{DcError, Result};
use crate::scalar::{lit, Scalar};

/// Right-hand side of an autonomous ODE. Evaluation may fail (e.g. when the
/// field needs an inner solve) and may carry state such as warm starts.
pub trait AutonomousField<T: Scalar> {
    fn eval(&mut self, y: &DVector<T>) -> Result<DVector<T>>;
}

impl<T: Scalar, F: FnMut(&DVector<T>) -> Result<DVector<T>>> AutonomousField<T> for F {
    fn eval(&mut self, y: &DVector<T>) -> Result<DVector<T>> {
        self(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk45Options<T: Scalar> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub step_init: T,
    /// Controller step below which integration is abandoned as stiff.
    pub min_step: T,
    pub max_steps: usize,
    pub safety: T,
    pub fac_min: T,
    pub fac_max: T,
    /// PI stabilization exponent.
    pub beta: T,
}

impl<T: Scalar> Default for Rk45Options<T> {
    fn default() -> Self {
        Self {
            rel_tol: lit(1e-8),
            abs_tol: lit(1e-10),
            step_init: lit(1e-2),
            min_step: lit(1e-14),
            max_steps: 1_000_000,
            safety: lit(0.9),
            fac_min: lit(0.2),
            fac_max: lit(10.0),
            beta: lit(0.04),
        }
    }
}

/// Butcher tableau rows; the last row holds the 5th order weights.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the 5th and 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    Reached,
    /// `‖F(y)‖` dropped below the halting threshold.
    Halted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rk45Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrator state. `k1` always holds `F(y)` (first-same-as-last).
#[derive(Debug, Clone)]
pub struct Dopri5<T: Scalar> {
    opts: Rk45Options<T>,
    t: T,
    y: DVector<T>,
    k1: DVector<T>,
    h: T,
    facold: T,
    stats: Rk45Stats,
}

impl<T: Scalar> Dopri5<T> {
    pub fn new<F: AutonomousField<T>>(field: &mut F, y0: DVector<T>, opts: Rk45Options<T>) -> Result<Self> {
        if !(opts.rel_tol > T::zero() && opts.abs_tol > T::zero() && opts.step_init > T::zero()) {
            return Err(DcError::InvalidInput("tolerances and initial step must be positive".into()));
        }
        let k1 = field.eval(&y0)?;
        Ok(Self {
            opts,
            t: T::zero(),
            y: y0,
            k1,
            h: opts.step_init,
            facold: lit(1e-4),
            stats: Rk45Stats { evaluations: 1, ..Rk45Stats::default() },
        })
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn y(&self) -> &DVector<T> {
        &self.y
    }

    /// `F(y)` at the current state.
    pub fn derivative(&self) -> &DVector<T> {
        &self.k1
    }

    pub fn stats(&self) -> Rk45Stats {
        self.stats
    }

    fn error_norm(&self, y_new: &DVector<T>, err: &DVector<T>) -> T {
        let n = T::from_usize_lossy(err.len().max(1));
        let sum = (0..err.len()).fold(T::zero(), |acc, i| {
            let scale = self.opts.abs_tol + self.opts.rel_tol * self.y[i].abs().max(y_new[i].abs());
            let r = err[i] / scale;
            acc + r * r
        });
        (sum / n).sqrt()
    }

    /// Integrates up to exactly `t_target`, or stops early when
    /// `‖F(y)‖ ≤ halt_below`.
    pub fn advance_to<F: AutonomousField<T>>(
        &mut self,
        field: &mut F,
        t_target: T,
        halt_below: Option<T>,
    ) -> Result<Advance> {
        let snap = T::machine_eps() * lit(64.0) * t_target.abs().max(T::one());
        let expo1 = lit::<T>(0.2) - self.opts.beta * lit(0.75);
        loop {
            if let Some(tol) = halt_below {
                if self.k1.norm() <= tol {
                    return Ok(Advance::Halted);
                }
            }
            let remaining = t_target - self.t;
            if remaining <= snap {
                self.t = t_target;
                return Ok(Advance::Reached);
            }
            if self.h < self.opts.min_step {
                return Err(DcError::StepUnderflow { t: self.t.as_f64(), h: self.h.as_f64() });
            }
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(DcError::Numeric(format!(
                    "step budget of {} exhausted at t = {}",
                    self.opts.max_steps, self.t
                )));
            }

            let clamped = self.h >= remaining;
            let h = if clamped { remaining } else { self.h };

            let mut k: Vec<DVector<T>> = Vec::with_capacity(7);
            k.push(self.k1.clone());
            for row in &A[1..7] {
                let mut ys = self.y.clone();
                for (kj, &aj) in k.iter().zip(row) {
                    let a = lit::<T>(aj);
                    if a != T::zero() {
                        ys.axpy(h * a, kj, T::one());
                    }
                }
                k.push(field.eval(&ys)?);
                self.stats.evaluations += 1;
            }
            // Stage 7 is evaluated at the 5th order solution.
            let mut y_new = self.y.clone();
            for (j, kj) in k.iter().enumerate().take(6) {
                let b = lit::<T>(A[6][j]);
                if b != T::zero() {
                    y_new.axpy(h * b, kj, T::one());
                }
            }
            let mut err = DVector::zeros(self.y.len());
            for (j, kj) in k.iter().enumerate() {
                let e = lit::<T>(E[j]);
                if e != T::zero() {
                    err.axpy(h * e, kj, T::one());
                }
            }
            let en = self.error_norm(&y_new, &err);
            if !en.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                self.stats.rejected += 1;
                self.h *= self.opts.fac_min;
                continue;
            }

            let fac11 = if en > T::zero() { en.powf(expo1) } else { T::zero() };
            if en <= T::one() {
                let mut fac = fac11 / self.facold.powf(self.opts.beta);
                fac = (fac / self.opts.safety)
                    .max(T::one() / self.opts.fac_max)
                    .min(T::one() / self.opts.fac_min);
                let h_new = h / fac;
                self.facold = en.max(lit(1e-4));
                self.t = if clamped { t_target } else { self.t + h };
                self.y = y_new;
                self.k1 = k.pop().expect("seven stages");
                self.stats.accepted += 1;
                // A step shortened to land on t_target says nothing about the
                // admissible step size, so it may only grow the controller.
                self.h = if clamped { h_new.max(self.h) } else { h_new };
            } else {
                let shrink = (fac11 / self.opts.safety).min(T::one() / self.opts.fac_min);
                self.h = h / shrink;
                self.stats.rejected += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let mut field = |y: &DVector<f64>| -> Result<DVector<f64>> { Ok(-y) };
        let mut ode = Dopri5::new(&mut field, DVector::from_vec(vec![1.0, 2.0]), Rk45Options::default()).unwrap();
        ode.advance_to(&mut field, 3.0, None).unwrap();
        assert_eq!(ode.t(), 3.0);
        assert!((ode.y()[0] - (-3.0f64).exp()).abs() < 1e-8);
        assert!((ode.y()[1] - 2.0 * (-3.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let mut field = |y: &DVector<f64>| -> Result<DVector<f64>> { Ok(DVector::from_vec(vec![y[1], -y[0]])) };
        let opts = Rk45Options { rel_tol: 1e-10, abs_tol: 1e-12, ..Rk45Options::default() };
        let mut ode = Dopri5::new(&mut field, DVector::from_vec(vec![1.0, 0.0]), opts).unwrap();
        ode.advance_to(&mut field, 2.0 * std::f64::consts::PI, None).unwrap();
        assert!((ode.y()[0] - 1.0).abs() < 1e-8);
        assert!(ode.y()[1].abs() < 1e-8);
    }

    #[test]
    fn halts_at_equilibrium() {
        let mut field = |y: &DVector<f64>| -> Result<DVector<f64>> { Ok(-y) };
        let mut ode = Dopri5::new(&mut field, DVector::from_vec(vec![1.0]), Rk45Options::default()).unwrap();
        let status = ode.advance_to(&mut field, 1e3, Some(1e-6)).unwrap();
        assert_eq!(status, Advance::Halted);
        assert!(ode.t() < 20.0);
    }

    #[test]
    fn stiff_problem_underflows() {
        let mut field = |y: &DVector<f64>| -> Result<DVector<f64>> { Ok(y.map(|v| v * v * 1e6)) };
        let mut ode = Dopri5::new(&mut field, DVector::from_vec(vec![1.0]), Rk45Options::default()).unwrap();
        let err = ode.advance_to(&mut field, 1.0, None).unwrap_err();
        assert!(matches!(err, DcError::StepUnderflow { .. } | DcError::Numeric(_)));
    }
}
