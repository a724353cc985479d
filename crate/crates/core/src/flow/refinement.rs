use nalgebra::DVector;

use super::{integrate_flow, interpolate, FlowConfig};
use crate::dc_core::{invert_grad_g, validate_point, DcProblem, NewtonConfig};
use crate::error::{DcError, Result};
use crate::scalar::Scalar;

/// One row of a refinement study: sup over the sample times of the distance
/// between the damped-DCA interpolant and the reference flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow<T: Scalar> {
    pub eta: T,
    /// `max_t ‖x^η(t) − x(t)‖`.
    pub deviation: T,
    /// `max_t ‖y^η(t) − y(t)‖` in dual coordinates.
    pub dual_deviation: T,
    pub steps: usize,
}

fn validate_etas<T: Scalar>(etas: &[T]) -> Result<()> {
    if etas.is_empty() {
        return Err(DcError::InvalidInput("at least one eta is required".into()));
    }
    if etas.iter().any(|&e| !(e > T::zero()) || !e.is_finite()) {
        return Err(DcError::InvalidInput("etas must be positive".into()));
    }
    if etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DcError::InvalidInput("etas must be strictly decreasing".into()));
    }
    Ok(())
}

/// Runs damped DCA in dual form with step `eta` over `[0, t_end]`, builds the
/// piecewise-affine interpolant `y^η(t)` through `y_k` at `t = kη`, and
/// measures its deviation from `reference(t) = (x(t), y(t))` at each sample
/// time.
pub fn euler_interpolant_deviation<T, P, R>(
    p: &P,
    x0: &DVector<T>,
    eta: T,
    t_end: T,
    sample_times: &[T],
    newton: &NewtonConfig<T>,
    mut reference: R,
) -> Result<RefinementRow<T>>
where
    T: Scalar,
    P: DcProblem<T> + ?Sized,
    R: FnMut(usize, T) -> Result<(DVector<T>, DVector<T>)>,
{
    validate_point(p, x0)?;
    let steps = (t_end / eta).ceil().to_usize().unwrap_or(0);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    let mut y = p.g_grad(x0);
    ys.push(y.clone());
    xs.push(x.clone());
    for _ in 0..steps {
        y = &y + (p.h_grad(&x) - &y) * eta;
        x = invert_grad_g(p, &y, &x, newton)?;
        ys.push(y.clone());
        xs.push(x.clone());
    }
    let knots: Vec<T> = (0..=steps).map(|k| T::from_usize_lossy(k) * eta).collect();

    let mut deviation = T::zero();
    let mut dual_deviation = T::zero();
    let mut warm = x0.clone();
    for (i, &t) in sample_times.iter().enumerate() {
        let y_eta = interpolate(&knots, &ys, t);
        let x_eta = invert_grad_g(p, &y_eta, &warm, newton)?;
        let (x_ref, y_ref) = reference(i, t)?;
        deviation = deviation.max((&x_eta - x_ref).norm());
        dual_deviation = dual_deviation.max((&y_eta - y_ref).norm());
        warm = x_eta;
    }
    Ok(RefinementRow { eta, deviation, dual_deviation, steps })
}

/// Deviation of damped DCA from a high-accuracy flow reference for each `eta`,
/// measured on the reference's sample grid over `[0, t_end]`.
pub fn euler_refinement_study<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    x0: &DVector<T>,
    etas: &[T],
    t_end: T,
    cfg: &FlowConfig<T>,
) -> Result<Vec<RefinementRow<T>>> {
    validate_etas(etas)?;
    let flow_cfg = FlowConfig { t_end, ..*cfg };
    let reference = integrate_flow(p, x0, &flow_cfg)?;
    etas.iter()
        .map(|&eta| {
            euler_interpolant_deviation(p, x0, eta, t_end, &reference.times, &cfg.newton, |i, _| {
                Ok((reference.x_states[i].clone(), reference.y_states[i].clone()))
            })
        })
        .collect()
}

/// Least-squares slope of `ln(deviation)` against `ln(eta)`.
pub fn log_log_slope<T: Scalar>(rows: &[RefinementRow<T>]) -> Option<T> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.deviation > T::zero())) {
        return None;
    }
    let pts: Vec<(T, T)> = rows.iter().map(|r| (r.eta.ln(), r.deviation.ln())).collect();
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
    let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
    let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::closed_form_linear_flow;
    use crate::problems::{make_double_well, make_quadratic};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn quadratic_refinement_is_first_order() {
        let a = DMatrix::identity(2, 2) * 2.0;
        let b = DMatrix::identity(2, 2);
        let p = make_quadratic(a.clone(), b.clone()).unwrap();
        let x0 = v(&[1.0, -1.0]);
        let samples: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let rows: Vec<_> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eta| {
                euler_interpolant_deviation(&p, &x0, eta, 5.0, &samples, &NewtonConfig::default(), |_, t| {
                    let x = closed_form_linear_flow(&a, &b, &x0, t)?;
                    let y = &a * &x;
                    Ok((x, y))
                })
                .unwrap()
            })
            .collect();
        for w in rows.windows(2) {
            let ratio = w[0].deviation / w[1].deviation;
            assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
        }
        let slope = log_log_slope(&rows).unwrap();
        assert!((0.8..=1.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn single_eta_gives_single_row() {
        let p = make_double_well(v(&[1.0, 4.0])).unwrap();
        let cfg = FlowConfig { record_stride: 0.1, ..FlowConfig::default() };
        let rows = euler_refinement_study(&p, &v(&[0.5, 0.5]), &[0.1], 1.0, &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].steps, 10);
    }

    #[test]
    fn critical_start_has_no_deviation() {
        let p = make_double_well(v(&[1.0, 4.0])).unwrap();
        let cfg = FlowConfig { record_stride: 0.1, ..FlowConfig::default() };
        let rows = euler_refinement_study(&p, &v(&[1.0, 1.0]), &[0.2, 0.1], 1.0, &cfg).unwrap();
        assert!(rows.iter().all(|r| r.deviation <= 100.0 * 1e-10));
    }

    #[test]
    fn eta_validation() {
        let p = make_double_well(v(&[1.0])).unwrap();
        let cfg = FlowConfig::default();
        assert!(euler_refinement_study(&p, &v(&[0.5]), &[0.1, 0.2], 1.0, &cfg).is_err());
        assert!(euler_refinement_study(&p, &v(&[0.5]), &[], 1.0, &cfg).is_err());
        assert!(euler_refinement_study(&p, &v(&[0.5]), &[-0.1], 1.0, &cfg).is_err());
    }
}
