//! Built-in DC instances with analytic constants.

use nalgebra::{DMatrix, DVector};

use crate::dc_core::DcProblem;
use crate::error::{DcError, Result};
use crate::linalg::{check_symmetric, eig_extremes, generalized_eigenvalues, sym_eigen};
use crate::region::BoxRegion;
use crate::scalar::{lit, Scalar};

fn psd_tol<T: Scalar>(scale: T) -> T {
    T::machine_eps() * lit(1e3) * scale.max(T::one())
}

/// `g = ½xᵀAx`, `h = ½xᵀBx` with `A ≻ 0`, `B ⪰ 0` and `A − B ⪰ 0`, so that
/// `f = ½xᵀ(A − B)x` is convex with `f⋆ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDc<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    mu: T,
    lg: T,
    sigma: Option<T>,
    alpha: Option<T>,
    /// Orthonormal basis of `range(A − B)`, one column per positive eigenvalue.
    range_basis: DMatrix<T>,
}

impl<T: Scalar> QuadraticDc<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        check_symmetric(&a, "A")?;
        check_symmetric(&b, "B")?;
        if a.shape() != b.shape() {
            return Err(DcError::DimensionMismatch { expected: a.nrows(), got: b.nrows() });
        }
        let (a_lo, a_hi) = eig_extremes(&a);
        if !(a_lo > T::zero()) {
            return Err(DcError::InvalidInput("A must be positive definite".into()));
        }
        let tol = psd_tol(a_hi);
        let (b_lo, _) = eig_extremes(&b);
        if b_lo < -tol {
            return Err(DcError::InvalidInput("B must be positive semidefinite".into()));
        }
        let hf = &a - &b;
        let (hvals, hvecs) = sym_eigen(&hf);
        if hvals[0] < -tol {
            return Err(DcError::InvalidInput("A - B must be positive semidefinite".into()));
        }

        let positive: Vec<usize> = (0..hvals.len()).filter(|&i| hvals[i] > tol).collect();
        let mut range_basis = DMatrix::zeros(a.nrows(), positive.len());
        for (dst, &src) in positive.iter().enumerate() {
            range_basis.set_column(dst, &hvecs.column(src));
        }
        let alpha = positive.first().map(|&i| hvals[i]);
        // σ is the smallest positive generalized eigenvalue of (A − B) against A.
        let sigma = generalized_eigenvalues(&hf, &a)?
            .iter()
            .copied()
            .find(|&v| v > tol / a_hi.max(T::one()));

        Ok(Self { a, b, mu: a_lo, lg: a_hi, sigma, alpha, range_basis })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    fn range_component(&self, x: &DVector<T>) -> DVector<T> {
        &self.range_basis * (self.range_basis.transpose() * x)
    }
}

impl<T: Scalar> DcProblem<T> for QuadraticDc<T> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn g_value(&self, x: &DVector<T>) -> T {
        lit::<T>(0.5) * x.dot(&(&self.a * x))
    }
    fn h_value(&self, x: &DVector<T>) -> T {
        lit::<T>(0.5) * x.dot(&(&self.b * x))
    }
    fn g_grad(&self, x: &DVector<T>) -> DVector<T> {
        &self.a * x
    }
    fn h_grad(&self, x: &DVector<T>) -> DVector<T> {
        &self.b * x
    }
    fn g_hess(&self, _x: &DVector<T>) -> DMatrix<T> {
        self.a.clone()
    }
    fn h_hess(&self, _x: &DVector<T>) -> DMatrix<T> {
        self.b.clone()
    }
    fn mu(&self) -> T {
        self.mu
    }
    fn lg(&self) -> Option<T> {
        Some(self.lg)
    }
    fn f_star(&self) -> Option<T> {
        Some(T::zero())
    }
    fn metric_pl_sigma(&self) -> Option<T> {
        self.sigma
    }
    fn quadratic_growth(&self) -> Option<T> {
        self.alpha
    }
    fn dist_to_minimizers(&self, x: &DVector<T>) -> Option<T> {
        Some(self.range_component(x).norm())
    }
    fn nearest_critical_point(&self, x: &DVector<T>) -> Option<DVector<T>> {
        Some(x - self.range_component(x))
    }
    fn name(&self) -> String {
        "quadratic".into()
    }
}

/// Builds the quadratic instance `g = ½xᵀAx`, `h = ½xᵀBx`.
pub fn make_quadratic<T: Scalar>(a: DMatrix<T>, b: DMatrix<T>) -> Result<QuadraticDc<T>> {
    QuadraticDc::new(a, b)
}

/// Double-well objective `f(x) = ¼Σxᵢ⁴ − ½Σxᵢ²` split as
/// `g_Q = ¼Σxᵢ⁴ + ½xᵀQx` and `h_Q = ½xᵀ(Q + I)x` with diagonal `Q ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellDc<T: Scalar> {
    q: DVector<T>,
}

impl<T: Scalar> DoubleWellDc<T> {
    /// Half-width of the cube on which `lg` is certified.
    pub const REGION_HALF_WIDTH: f64 = 2.0;

    pub fn new(q: DVector<T>) -> Result<Self> {
        if q.is_empty() {
            return Err(DcError::InvalidInput("q must be non-empty".into()));
        }
        if q.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(DcError::InvalidInput("every q_i must be positive and finite".into()));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> &DVector<T> {
        &self.q
    }
}

impl<T: Scalar> DcProblem<T> for DoubleWellDc<T> {
    fn dim(&self) -> usize {
        self.q.len()
    }
    fn g_value(&self, x: &DVector<T>) -> T {
        let quarter = lit::<T>(0.25);
        let half = lit::<T>(0.5);
        x.iter()
            .zip(self.q.iter())
            .fold(T::zero(), |acc, (&xi, &qi)| acc + quarter * xi.powi(4) + half * qi * xi * xi)
    }
    fn h_value(&self, x: &DVector<T>) -> T {
        let half = lit::<T>(0.5);
        x.iter()
            .zip(self.q.iter())
            .fold(T::zero(), |acc, (&xi, &qi)| acc + half * (qi + T::one()) * xi * xi)
    }
    fn g_grad(&self, x: &DVector<T>) -> DVector<T> {
        x.zip_map(&self.q, |xi, qi| xi * xi * xi + qi * xi)
    }
    fn h_grad(&self, x: &DVector<T>) -> DVector<T> {
        x.zip_map(&self.q, |xi, qi| (qi + T::one()) * xi)
    }
    fn g_hess(&self, x: &DVector<T>) -> DMatrix<T> {
        let three = lit::<T>(3.0);
        DMatrix::from_diagonal(&x.zip_map(&self.q, |xi, qi| three * xi * xi + qi))
    }
    fn h_hess(&self, _x: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.q.map(|qi| qi + T::one()))
    }
    fn mu(&self) -> T {
        self.q.min()
    }
    fn region(&self) -> Option<BoxRegion<T>> {
        let w = lit::<T>(Self::REGION_HALF_WIDTH);
        BoxRegion::cube(self.dim(), -w, w).ok()
    }
    fn lg(&self) -> Option<T> {
        let w = lit::<T>(Self::REGION_HALF_WIDTH);
        Some(lit::<T>(3.0) * w * w + self.q.max())
    }
    fn f_star(&self) -> Option<T> {
        Some(-lit::<T>(0.25) * T::from_usize_lossy(self.dim()))
    }
    fn dist_to_minimizers(&self, x: &DVector<T>) -> Option<T> {
        Some(x.map(|v| v.abs() - T::one()).norm())
    }
    /// Critical points have every coordinate in `{−1, 0, 1}`; each coordinate
    /// is snapped to the nearest of the three.
    fn nearest_critical_point(&self, x: &DVector<T>) -> Option<DVector<T>> {
        let half = lit::<T>(0.5);
        Some(x.map(|v| {
            if v > half {
                T::one()
            } else if v < -half {
                -T::one()
            } else {
                T::zero()
            }
        }))
    }
    fn name(&self) -> String {
        "double_well".into()
    }
}

pub fn make_double_well<T: Scalar>(q: DVector<T>) -> Result<DoubleWellDc<T>> {
    DoubleWellDc::new(q)
}

/// The decomposition `(g + φ) − (h + φ)` of the same objective, with
/// `φ = ½xᵀdiag(d)x`. The Hessian metric becomes `G + diag(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedDc<T: Scalar, P> {
    inner: P,
    d: DVector<T>,
}

impl<T: Scalar, P: DcProblem<T>> ShiftedDc<T, P> {
    pub fn new(inner: P, d: DVector<T>) -> Result<Self> {
        if d.len() != inner.dim() {
            return Err(DcError::DimensionMismatch { expected: inner.dim(), got: d.len() });
        }
        if d.iter().any(|&v| v < T::zero() || !v.is_finite()) {
            return Err(DcError::InvalidInput("shift entries must be nonnegative and finite".into()));
        }
        Ok(Self { inner, d })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn shift(&self) -> &DVector<T> {
        &self.d
    }

    fn phi(&self, x: &DVector<T>) -> T {
        lit::<T>(0.5) * x.zip_fold(&self.d, T::zero(), |acc, xi, di| acc + di * xi * xi)
    }
}

impl<T: Scalar, P: DcProblem<T>> DcProblem<T> for ShiftedDc<T, P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn g_value(&self, x: &DVector<T>) -> T {
        self.inner.g_value(x) + self.phi(x)
    }
    fn h_value(&self, x: &DVector<T>) -> T {
        self.inner.h_value(x) + self.phi(x)
    }
    fn g_grad(&self, x: &DVector<T>) -> DVector<T> {
        self.inner.g_grad(x) + x.component_mul(&self.d)
    }
    fn h_grad(&self, x: &DVector<T>) -> DVector<T> {
        self.inner.h_grad(x) + x.component_mul(&self.d)
    }
    fn g_hess(&self, x: &DVector<T>) -> DMatrix<T> {
        self.inner.g_hess(x) + DMatrix::from_diagonal(&self.d)
    }
    fn h_hess(&self, x: &DVector<T>) -> DMatrix<T> {
        self.inner.h_hess(x) + DMatrix::from_diagonal(&self.d)
    }
    fn mu(&self) -> T {
        self.inner.mu() + self.d.min()
    }
    fn region(&self) -> Option<BoxRegion<T>> {
        self.inner.region()
    }
    fn lg(&self) -> Option<T> {
        self.inner.lg().map(|l| l + self.d.max())
    }
    fn f_star(&self) -> Option<T> {
        self.inner.f_star()
    }
    fn quadratic_growth(&self) -> Option<T> {
        self.inner.quadratic_growth()
    }
    fn dist_to_minimizers(&self, x: &DVector<T>) -> Option<T> {
        self.inner.dist_to_minimizers(x)
    }
    fn nearest_critical_point(&self, x: &DVector<T>) -> Option<DVector<T>> {
        self.inner.nearest_critical_point(x)
    }
    fn name(&self) -> String {
        format!("shifted({})", self.inner.name())
    }
}

pub fn make_shifted_decomposition<T: Scalar, P: DcProblem<T>>(
    p: P,
    phi_hess_diag: DVector<T>,
) -> Result<ShiftedDc<T, P>> {
    ShiftedDc::new(p, phi_hess_diag)
}
