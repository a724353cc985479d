use crate::dc_core::DcProblem;
use crate::error::{DcError, Result};
use crate::linalg::eig_extremes;
use crate::region::BoxRegion;
use crate::scalar::{lit, Scalar};

/// Eigenvalue bounds `m I ⪯ G(x) ⪯ M I` over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBounds<T: Scalar> {
    pub m: T,
    pub big_m: T,
    pub region: BoxRegion<T>,
}

fn sampled_extremes<T: Scalar>(
    region: &BoxRegion<T>,
    n_samples: usize,
    hess: impl Fn(&nalgebra::DVector<T>) -> nalgebra::DMatrix<T>,
) -> (T, T) {
    let mut lo = T::max_value().unwrap_or_else(T::one);
    let mut hi = T::min_value().unwrap_or_else(|| -T::one());
    for x in region.low_discrepancy_samples(n_samples) {
        let (a, b) = eig_extremes(&hess(&x));
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}

/// Samples `λ_min`/`λ_max` of `∇²g` at the box corners, center and
/// `n_samples` Halton points, then widens the range by 1% of its spread.
/// The lower bound never drops below the global strong-convexity constant.
pub fn metric_bounds_on_box<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    region: &BoxRegion<T>,
    n_samples: usize,
) -> Result<MetricBounds<T>> {
    if region.dim() != p.dim() {
        return Err(DcError::DimensionMismatch { expected: p.dim(), got: region.dim() });
    }
    let (lo, hi) = sampled_extremes(region, n_samples, |x| p.g_hess(x));
    let margin = (hi - lo) * lit(0.01);
    let m = (lo - margin).max(p.mu());
    let big_m = (hi + margin).max(m);
    if !(m > T::zero()) {
        return Err(DcError::Numeric("metric lower bound is not positive".into()));
    }
    Ok(MetricBounds { m, big_m, region: region.clone() })
}

/// Sampled extremes `(m_f, L_f)` of the eigenvalues of `∇²f` over a box,
/// without widening; the corners are always included.
pub fn hessian_f_bounds_on_box<T: Scalar, P: DcProblem<T> + ?Sized>(
    p: &P,
    region: &BoxRegion<T>,
    n_samples: usize,
) -> Result<(T, T)> {
    if region.dim() != p.dim() {
        return Err(DcError::DimensionMismatch { expected: p.dim(), got: region.dim() });
    }
    Ok(sampled_extremes(region, n_samples, |x| p.g_hess(x) - p.h_hess(x)))
}

/// Converts a Euclidean PL constant into the metric one and back:
/// returns `(μ_E / M, m μ_E / M)`.
pub fn pl_constant_conversion<T: Scalar>(mb: &MetricBounds<T>, mu_euclidean: T) -> Result<(T, T)> {
    if !(mu_euclidean > T::zero() && mb.m > T::zero() && mb.big_m > T::zero()) {
        return Err(DcError::InvalidInput("PL constant and metric bounds must be positive".into()));
    }
    let metric_mu = mu_euclidean / mb.big_m;
    Ok((metric_mu, mb.m * metric_mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_double_well, make_quadratic};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn constant_metric_is_exact() {
        let p = make_quadratic(DMatrix::identity(2, 2) * 2.0, DMatrix::identity(2, 2)).unwrap();
        let region = BoxRegion::cube(2, -3.0, 3.0).unwrap();
        let mb = metric_bounds_on_box(&p, &region, 64).unwrap();
        assert_eq!((mb.m, mb.big_m), (2.0, 2.0));
        let (mu, back) = pl_constant_conversion(&mb, 0.7).unwrap();
        assert_relative_eq!(mu, 0.35);
        assert_relative_eq!(back, 0.7);
    }

    #[test]
    fn double_well_unit_box() {
        let p = make_double_well(DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let region = BoxRegion::cube(2, -1.0, 1.0).unwrap();
        let mb = metric_bounds_on_box(&p, &region, 128).unwrap();
        assert_relative_eq!(mb.m, 1.0);
        assert_relative_eq!(mb.big_m, 4.03, epsilon = 1e-12);
    }

    #[test]
    fn conversion_example() {
        let region = BoxRegion::cube(1, 0.0, 1.0).unwrap();
        let mb = MetricBounds { m: 1.0, big_m: 4.0, region };
        assert_eq!(pl_constant_conversion(&mb, 1.0).unwrap(), (0.25, 0.25));
        assert!(pl_constant_conversion(&mb, 0.0).is_err());
    }

    #[test]
    fn dimension_checked() {
        let p = make_double_well(DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let region = BoxRegion::cube(3, -1.0, 1.0).unwrap();
        assert!(metric_bounds_on_box(&p, &region, 4).is_err());
    }
}
