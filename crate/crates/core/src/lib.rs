//! Damped difference-of-convex iterations, their dual-coordinate ODE limit and
//! the Hessian-metric gradient flow, with numerical checks for descent, rates
//! and linearization.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom fix `f64`, which is what the analysis tolerances are tuned for.
//!
//! ```
//! use dcflow::{make_quadratic, run_scheme, Matrix, Mode, SchemeConfig, Vector};
//!
//! let p = make_quadratic(Matrix::identity(2, 2) * 2.0, Matrix::identity(2, 2)).unwrap();
//! let trace = run_scheme(&p, &Vector::from_row_slice(&[1.0, 0.0]), &SchemeConfig::with_eta(0.5), Mode::Primal).unwrap();
//! assert!(trace.f_values.last().unwrap() < &1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dc_core;
mod error;
pub mod flow;
pub mod linalg;
pub mod problems;
mod region;
mod scalar;
pub mod schemes;

pub use dc_core::{
    bregman_g, f_grad, f_hess, f_value, invert_grad_g, metric_dual_norm_sq, primal_velocity, t_map,
    DcProblem, NewtonConfig, Point,
};
pub use error::{DcError, Result};
pub use flow::{closed_form_linear_flow, integrate_flow, FlowConfig, FlowTrace};
pub use problems::{
    make_double_well, make_quadratic, make_shifted_decomposition, DoubleWellDc, QuadraticDc, ShiftedDc,
};
pub use region::BoxRegion;
pub use scalar::{lit, Scalar};
pub use schemes::{
    audit_descent, damped_dca_step, dca_step, dual_euler_step, run_scheme, IterateTrace, Mode, SchemeConfig,
    Termination,
};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type QuadraticDc64 = QuadraticDc<f64>;
pub type DoubleWellDc64 = DoubleWellDc<f64>;
pub type IterateTrace64 = IterateTrace<f64>;
pub type FlowTrace64 = FlowTrace<f64>;
pub type FlowConfig64 = FlowConfig<f64>;
pub type SchemeConfig64 = SchemeConfig<f64>;
pub type BoxRegion64 = BoxRegion<f64>;
