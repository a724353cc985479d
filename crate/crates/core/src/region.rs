//! Axis-aligned boxes on which constants are certified, with deterministic samplers.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{DcError, Result};
use crate::scalar::{lit, Scalar};

const HALTON_PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Box `[lower_i, upper_i]` in each coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion<T: Scalar> {
    lower: DVector<T>,
    upper: DVector<T>,
}

impl<T: Scalar> BoxRegion<T> {
    pub fn new(lower: DVector<T>, upper: DVector<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(DcError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(DcError::InvalidInput("empty box: zero dimensions".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(DcError::InvalidInput(format!("box bound {i} is not finite")));
            }
            if lo > hi {
                return Err(DcError::InvalidInput(format!("empty box: lower > upper in coordinate {i}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    /// The cube of half-width `radius` around `center`.
    pub fn around(center: &DVector<T>, radius: T) -> Result<Self> {
        Self::new(center.add_scalar(-radius), center.add_scalar(radius))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<T> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<T> {
        &self.upper
    }

    pub fn center(&self) -> DVector<T> {
        (&self.lower + &self.upper) * lit::<T>(0.5)
    }

    pub fn contains(&self, x: &DVector<T>, slack: T) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(&v, (&lo, &hi))| v >= lo - slack && v <= hi + slack)
    }

    /// Maps a point of the unit cube onto the box.
    fn scale_unit(&self, u: impl Iterator<Item = T>) -> DVector<T> {
        let coords: Vec<T> = u
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(s, (&lo, &hi))| lo + s * (hi - lo))
            .collect();
        DVector::from_vec(coords)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let n = self.dim();
        self.scale_unit((0..n).map(|_| lit::<T>(rng.random::<f64>())))
    }

    /// Deterministic sample set: every corner (for `dim ≤ 10`), the center,
    /// and `n_halton` points of the Halton sequence.
    pub fn low_discrepancy_samples(&self, n_halton: usize) -> Vec<DVector<T>> {
        let n = self.dim();
        let mut out = Vec::new();
        if n <= 10 {
            for mask in 0u32..(1u32 << n) {
                out.push(self.scale_unit(
                    (0..n).map(|i| if mask & (1 << i) != 0 { T::one() } else { T::zero() }),
                ));
            }
        }
        out.push(self.center());
        for k in 1..=n_halton {
            out.push(self.scale_unit((0..n).map(|i| {
                let base = HALTON_PRIMES[i % HALTON_PRIMES.len()];
                lit::<T>(radical_inverse(k as u64, base as u64))
            })));
        }
        out
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    r
}
