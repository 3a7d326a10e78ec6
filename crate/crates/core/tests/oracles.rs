mod common;

use common::*;
use nalgebra::{DMatrix, DVector};

#[test]
fn jacobi_two_by_two() {
    let a = DMatrix::from_row_slice(2, 2, &[0.37, 0.48, 0.48, 0.68]);
    let (vals, vecs) = jacobi_eigen(&a);
    let disc = (1.05f64 * 1.05 - 4.0 * 0.0212).sqrt();
    assert!((vals[0] - 0.5 * (1.05 - disc)).abs() < 1e-15);
    assert!((vals[1] - 0.5 * (1.05 + disc)).abs() < 1e-15);
    let r = &a * &vecs - &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals));
    assert!(max_abs(&r) < 1e-15);
}

#[test]
fn lagrange_single_asset() {
    // one risky asset: the budget and return constraints pin everything
    let (x0, x) = lagrange_allocation(&[0.07], &[0.04], 0.02, 0.045);
    assert!((x[0] - 0.5).abs() < 1e-14);
    assert!((x0 - 0.5).abs() < 1e-14);
}
