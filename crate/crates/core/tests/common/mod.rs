#![allow(dead_code)]

use dcflow::{make_double_well, make_quadratic, DoubleWellDc64, Matrix, QuadraticDc64, Vector};
use proptest::prelude::*;

/// `A = LLᵀ + I`, `B = L D Lᵀ` with `D ∈ [0, 1]ᴺ`, so `A ≻ 0`, `B ⪰ 0`, `A − B ⪰ I`.
pub fn quadratic(n: usize) -> impl Strategy<Value = QuadraticDc64> {
    (
        prop::collection::vec(-1.0f64..1.0, n * n),
        prop::collection::vec(0.0f64..1.0, n),
    )
        .prop_map(move |(l, d)| {
            let l = Matrix::from_row_slice(n, n, &l);
            let a = &l * l.transpose() + Matrix::identity(n, n);
            let b = &l * Matrix::from_diagonal(&Vector::from_vec(d)) * l.transpose();
            make_quadratic(a, b).unwrap()
        })
}

pub fn double_well(n: usize) -> impl Strategy<Value = DoubleWellDc64> {
    prop::collection::vec(0.25f64..4.0, n).prop_map(|q| make_double_well(Vector::from_vec(q)).unwrap())
}

pub fn point(n: usize, half_width: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-half_width..half_width, n).prop_map(Vector::from_vec)
}

pub fn unit(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.0f64..1.0, n)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|v| {
            let v = Vector::from_vec(v);
            let n = v.norm();
            v / n
        })
}

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}
