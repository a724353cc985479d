//! Dense symmetric linear algebra helpers.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{DcError, Result};
use crate::scalar::{lit, Scalar};

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub(crate) fn symmetry_tol<T: Scalar>() -> T {
    T::machine_eps() * lit(1e4)
}

pub fn check_square<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(DcError::InvalidInput(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(DcError::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub fn check_symmetric<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<()> {
    check_square(m, what)?;
    let scale = m.amax().max(T::one());
    let tol = symmetry_tol::<T>() * scale;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(DcError::InvalidInput(format!(
                    "{what} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub fn sym_eigen<T: Scalar>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eig_extremes<T: Scalar>(m: &DMatrix<T>) -> (T, T) {
    let (values, _) = sym_eigen(m);
    (values[0], values[values.len() - 1])
}

/// `V diag(f(λ)) Vᵀ` for a symmetric matrix.
pub fn sym_apply<T: Scalar>(m: &DMatrix<T>, f: impl Fn(T) -> T) -> DMatrix<T> {
    let (values, vectors) = sym_eigen(m);
    let mapped = DMatrix::from_diagonal(&values.map(f));
    &vectors * mapped * vectors.transpose()
}

/// Inverse square root of a symmetric positive-definite matrix.
pub fn spd_inv_sqrt<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<DMatrix<T>> {
    let (lo, _) = eig_extremes(m);
    if !(lo > T::zero()) {
        return Err(DcError::InvalidInput(format!("{what} is not positive definite")));
    }
    Ok(sym_apply(m, |v| T::one() / v.sqrt()))
}

pub fn spd_sqrt<T: Scalar>(m: &DMatrix<T>, what: &str) -> Result<DMatrix<T>> {
    let (lo, _) = eig_extremes(m);
    if !(lo > T::zero()) {
        return Err(DcError::InvalidInput(format!("{what} is not positive definite")));
    }
    Ok(sym_apply(m, |v| v.sqrt()))
}

/// Solves `m x = rhs` for symmetric positive-definite `m`.
pub fn spd_solve<T: Scalar>(m: &DMatrix<T>, rhs: &DVector<T>) -> Result<DVector<T>> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| DcError::Numeric("Cholesky factorization failed".into()))?;
    let x = chol.solve(rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DcError::NonFinite("linear solve"));
    }
    Ok(x)
}

/// `G^{-1/2} H G^{-1/2}`: symmetric matrix similar to `G⁻¹H`.
pub fn symmetrized_pencil<T: Scalar>(h: &DMatrix<T>, g: &DMatrix<T>) -> Result<DMatrix<T>> {
    let w = spd_inv_sqrt(g, "metric")?;
    let s = &w * h * &w;
    Ok((&s + s.transpose()) * lit::<T>(0.5))
}

/// Eigenvalues of `G⁻¹H`, computed on the symmetrized pencil, sorted ascending.
pub fn generalized_eigenvalues<T: Scalar>(h: &DMatrix<T>, g: &DMatrix<T>) -> Result<DVector<T>> {
    Ok(sym_eigen(&symmetrized_pencil(h, g)?).0)
}

pub fn frobenius<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}
