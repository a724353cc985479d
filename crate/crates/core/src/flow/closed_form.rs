use nalgebra::{DMatrix, DVector};

use crate::error::{DcError, Result};
use crate::linalg::{check_symmetric, eig_extremes, spd_inv_sqrt, spd_sqrt, sym_apply, symmetrized_pencil};
use crate::scalar::{lit, Scalar};

/// Exact flow for `g = ½xᵀAx`, `h = ½xᵀBx`.
///
/// The dual ODE is linear, `ẏ = (BA⁻¹ − I)y`, and with
/// `C = A^{-1/2} B A^{-1/2}` the primal solution is
/// `x(t) = A^{-1/2} exp(t(C − I)) A^{1/2} x0`.
pub fn closed_form_linear_flow<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    x0: &DVector<T>,
    t: T,
) -> Result<DVector<T>> {
    check_symmetric(a, "A")?;
    check_symmetric(b, "B")?;
    if a.shape() != b.shape() || a.nrows() != x0.len() {
        return Err(DcError::DimensionMismatch { expected: a.nrows(), got: x0.len() });
    }
    let (_, a_hi) = eig_extremes(a);
    let (b_lo, _) = eig_extremes(b);
    if b_lo < -T::machine_eps() * lit(1e3) * a_hi.max(T::one()) {
        return Err(DcError::InvalidInput("B must be positive semidefinite".into()));
    }
    let root = spd_sqrt(a, "A")?;
    let inv_root = spd_inv_sqrt(a, "A")?;
    let c = symmetrized_pencil(b, a)?;
    let propagator = sym_apply(&c, |lambda| ((lambda - T::one()) * t).exp());
    Ok(inv_root * propagator * root * x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    /// Truncated Taylor series of `exp(M)`, with scaling and squaring.
    fn expm_series(m: &DMatrix<f64>) -> DMatrix<f64> {
        let s = 8;
        let scaled = m / 2f64.powi(s);
        let n = m.nrows();
        let mut term = DMatrix::identity(n, n);
        let mut sum = DMatrix::identity(n, n);
        for k in 1..30 {
            term = &term * &scaled / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn zero_time_is_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert_relative_eq!(closed_form_linear_flow(&a, &b, &v(&[0.3, -0.7]), 0.0).unwrap(), v(&[0.3, -0.7]), epsilon = 1e-14);
    }

    #[test]
    fn scalar_examples() {
        let a = DMatrix::identity(2, 2) * 2.0;
        let b = DMatrix::identity(2, 2);
        let x = closed_form_linear_flow(&a, &b, &v(&[1.0, 0.0]), 4f64.ln()).unwrap();
        assert_relative_eq!(x, v(&[0.5, 0.0]), epsilon = 1e-14);

        let x = closed_form_linear_flow(&a, &DMatrix::zeros(2, 2), &v(&[1.0, 2.0]), 1.5).unwrap();
        assert_relative_eq!(x, v(&[1.0, 2.0]) * (-1.5f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn matches_series_exponential_of_dual_generator() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 0.5]);
        let x0 = v(&[1.0, -2.0, 0.5]);
        let t = 2.3;
        let a_inv = a.clone().try_inverse().unwrap();
        let gen = (&b * &a_inv - DMatrix::identity(3, 3)) * t;
        let expected = &a_inv * expm_series(&gen) * &a * &x0;
        assert_relative_eq!(closed_form_linear_flow(&a, &b, &x0, t).unwrap(), expected, epsilon = 1e-11);
    }

    #[test]
    fn rejects_bad_matrices() {
        let x0 = v(&[1.0, 1.0]);
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(closed_form_linear_flow(&asym, &DMatrix::zeros(2, 2), &x0, 1.0).is_err());
        let indefinite = DMatrix::from_diagonal(&v(&[1.0, -1.0]));
        assert!(closed_form_linear_flow(&indefinite, &DMatrix::zeros(2, 2), &x0, 1.0).is_err());
        assert!(closed_form_linear_flow(&DMatrix::identity(2, 2), &indefinite, &x0, 1.0).is_err());
    }
}
