//! Small dense-linear-algebra helpers shared by the circuit and precoder
//! modules. All solves go through LU with partial pivoting; explicit
//! inversion is avoided everywhere.

use nalgebra::{DMatrix, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// LU factorization handle.
pub type CLu = nalgebra::LU<Complex64, Dyn, Dyn>;

/// Reciprocal-condition floor below which a factor is declared singular.
pub const RCOND_FLOOR: f64 = 1e-14;

/// Factorizes `a`, returning the LU together with a cheap reciprocal
/// condition estimate (min/max magnitude of the U diagonal). Fails when the
/// estimate drops below [`RCOND_FLOOR`].
pub fn lu_with_rcond(a: CMat, context: &'static str) -> Result<(CLu, f64)> {
    let n = a.nrows();
    let lu = a.lu();
    let u = lu.u();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for k in 0..n {
        let d = u[(k, k)].norm();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(rcond > RCOND_FLOOR) {
        return Err(Error::SingularMatrix { context, rcond });
    }
    Ok((lu, rcond))
}

/// Solves A·X = B for X.
pub fn solve(a: CMat, b: &CMat, context: &'static str) -> Result<CMat> {
    let (lu, rcond) = lu_with_rcond(a, context)?;
    lu.solve(b).ok_or(Error::SingularMatrix { context, rcond })
}

/// X·A⁻¹ for a complex *symmetric* A (reciprocal networks): equals
/// (A⁻¹·Xᵀ)ᵀ, so one factorization serves both sides.
pub fn solve_right_symmetric(lu: &CLu, x: &CMat, context: &'static str) -> Result<CMat> {
    let xt = x.transpose();
    let sol = lu.solve(&xt).ok_or(Error::SingularMatrix { context, rcond: 0.0 })?;
    Ok(sol.transpose())
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Re tr(A·B) evaluated without forming the product.
pub fn real_trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> CMat {
        CMat::from_fn(n, n, |i, j| {
            Complex64::new(
                ((i * 7 + j * 3) % 5) as f64 + if i == j { 10.0 } else { 0.0 },
                ((i + 2 * j) % 3) as f64,
            )
        })
    }

    #[test]
    fn solve_round_trip() {
        let a = test_matrix(6);
        let b = CMat::from_fn(6, 2, |i, j| Complex64::new(i as f64, j as f64 + 1.0));
        let x = solve(a.clone(), &b, "test").unwrap();
        let err = fro_norm(&(&a * &x - &b)) / fro_norm(&b);
        assert!(err < 1e-12);
    }

    #[test]
    fn right_solve_matches_dense_inverse() {
        let a = {
            // Symmetrize.
            let m = test_matrix(5);
            (&m + m.transpose()) * Complex64::new(0.5, 0.0)
        };
        let x = CMat::from_fn(3, 5, |i, j| Complex64::new((i + j) as f64, i as f64 - 1.0));
        let (lu, _) = lu_with_rcond(a.clone(), "test").unwrap();
        let got = solve_right_symmetric(&lu, &x, "test").unwrap();
        let inv = a.try_inverse().unwrap();
        let expect = &x * inv;
        assert!(fro_norm(&(got - expect)) < 1e-10);
    }

    #[test]
    fn singular_matrix_reported() {
        let mut a = test_matrix(4);
        // Make row 3 a copy of row 2.
        for j in 0..4 {
            a[(3, j)] = a[(2, j)];
        }
        let b = CMat::zeros(4, 1);
        match solve(a, &b, "degenerate") {
            Err(Error::SingularMatrix { context, rcond }) => {
                assert_eq!(context, "degenerate");
                assert!(rcond <= RCOND_FLOOR);
            }
            other => panic!("expected singular-matrix error, got {other:?}"),
        }
    }

    #[test]
    fn trace_product_matches_dense() {
        let a = CMat::from_fn(3, 4, |i, j| Complex64::new(i as f64 + 1.0, j as f64));
        let b = CMat::from_fn(4, 3, |i, j| Complex64::new(j as f64 - 1.0, i as f64 * 0.5));
        let dense = (&a * &b).trace().re;
        assert!((real_trace_product(&a, &b) - dense).abs() < 1e-12);
    }
}
