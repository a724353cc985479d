mod common;

use common::{point, quadratic, v};
use dcflow::flow::{euler_refinement_study, log_log_slope};
use dcflow::{
    closed_form_linear_flow, f_grad, integrate_flow, make_double_well, make_quadratic, FlowConfig, Matrix,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integrated_flow_matches_closed_form(p in quadratic(3), x0 in point(3, 2.0)) {
        let cfg = FlowConfig { t_end: 5.0, record_stride: 1.0, ..FlowConfig::default() };
        let tr = integrate_flow(&p, &x0, &cfg).unwrap();
        for t in [1.0, 5.0] {
            let exact = closed_form_linear_flow(p.a(), p.b(), &x0, t).unwrap();
            prop_assert!((tr.x_at(t) - exact).norm() <= 1e-6);
        }
    }

    #[test]
    fn values_never_increase(q in prop::collection::vec(0.5f64..4.0, 2), x0 in point(2, 2.0)) {
        let p = make_double_well(dcflow::Vector::from_vec(q)).unwrap();
        let cfg = FlowConfig { t_end: 5.0, record_stride: 0.05, ..FlowConfig::default() };
        let tr = integrate_flow(&p, &x0, &cfg).unwrap();
        for w in tr.f_values.windows(2) {
            prop_assert!(w[1] <= w[0] + 10.0 * cfg.rel_tol * (1.0 + w[0].abs()));
        }
    }
}

#[test]
fn long_runs_end_critical() {
    let p = make_double_well(v(&[1.0, 4.0])).unwrap();
    let cfg = FlowConfig { t_end: 100.0, record_stride: 1.0, ..FlowConfig::default() };
    for x0 in [v(&[0.5, 0.5]), v(&[-1.7, 0.2]), v(&[1.9, -1.9])] {
        let tr = integrate_flow(&p, &x0, &cfg).unwrap();
        assert!(f_grad(&p, tr.last_x()).unwrap().norm() <= 1e-6);
        assert!(tr.max_y_norm().is_finite());
    }
}

#[test]
fn splittings_give_different_flows() {
    let even = make_double_well(v(&[1.0, 1.0])).unwrap();
    let uneven = make_double_well(v(&[1.0, 4.0])).unwrap();
    let cfg = FlowConfig { t_end: 1.0, record_stride: 0.01, ..FlowConfig::default() };
    let x0 = v(&[0.5, 0.5]);
    let a = integrate_flow(&even, &x0, &cfg).unwrap();
    let b = integrate_flow(&uneven, &x0, &cfg).unwrap();
    for x in a.x_states.iter().chain(&b.x_states) {
        let fa = dcflow::f_value(&even, x).unwrap();
        let fb = dcflow::f_value(&uneven, x).unwrap();
        assert!((fa - fb).abs() < 1e-12);
    }
    let sup = a.x_states.iter().zip(&b.x_states).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);
    assert!(sup >= 1e-2, "{sup}");
    // The even split keeps the diagonal, the uneven one leaves it at once.
    assert!(a.x_states.iter().all(|x| (x[0] - x[1]).abs() < 1e-12));
    assert!((b.x_states[1][0] - b.x_states[1][1]).abs() > 0.0);
}

#[test]
fn euler_refinement_is_first_order_on_both_families() {
    let cfg = FlowConfig { t_end: 5.0, record_stride: 0.01, ..FlowConfig::default() };
    let quad = make_quadratic(Matrix::identity(2, 2) * 2.0, Matrix::identity(2, 2)).unwrap();
    let rows = euler_refinement_study(&quad, &v(&[1.0, -0.5]), &[0.2, 0.1, 0.05], 5.0, &cfg).unwrap();
    let slope = log_log_slope(&rows).unwrap();
    assert!((0.8..=1.2).contains(&slope), "{slope}");

    let dw = make_double_well(v(&[1.0, 4.0])).unwrap();
    let rows = euler_refinement_study(&dw, &v(&[0.5, 0.5]), &[0.2, 0.1, 0.05], 5.0, &cfg).unwrap();
    let slope = log_log_slope(&rows).unwrap();
    assert!((0.8..=1.2).contains(&slope), "{slope}");
}
