//! Dense complex linear algebra helpers shared by the simulation and the
//! deterministic-equivalent solvers.
//!
//! Products of large complex matrices are routed through four real
//! `matrixmultiply` kernels, which is an order of magnitude faster than the
//! generic complex path in nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

const SPLIT_THRESHOLD: usize = 16 * 16 * 16;

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn split(a: &CMat) -> (RMat, RMat) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

fn join(re: RMat, im: RMat) -> CMat {
    re.zip_map(&im, Complex64::new)
}

/// `A · B`.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_THRESHOLD {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    join(re, im)
}

/// `Aᴴ · B`.
pub fn adjoint_mul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows(), "adjoint_mul dimension mismatch");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_THRESHOLD {
        return a.ad_mul(b);
    }
    let (ar, ai) = split(a);
    let (ar, ai) = (ar.transpose(), ai.transpose());
    let (br, bi) = split(b);
    let re = &ar * &br + &ai * &bi;
    let im = &ar * &bi - &ai * &br;
    join(re, im)
}

/// `tr(A · B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    // b is column-major, so walk b's columns against a's rows.
    for i in 0..a.nrows() {
        let col = b.column(i);
        for j in 0..a.ncols() {
            acc += a[(i, j)] * col[j];
        }
    }
    acc
}

/// `(M + Mᴴ) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Cholesky factorization that rejects indefinite and numerically singular
/// matrices. Pivots must exceed `1e-12` of the matching diagonal entry.
pub fn cholesky(m: &CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = hermitize(m).cholesky()?;
    let l = chol.l_dirty();
    let ok = (0..m.nrows()).all(|i| {
        let p = l[(i, i)];
        let scale = m[(i, i)].re.abs().max(f64::MIN_POSITIVE);
        p.re > 0.0 && p.im.abs() <= 1e-8 * p.re && p.re * p.re > 1e-12 * scale
    });
    ok.then_some(chol)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_inverse(m: &CMat, context: &'static str) -> Result<CMat> {
    let chol = cholesky(m).ok_or(Error::NotPositiveDefinite(context))?;
    Ok(chol.inverse())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖A − B‖_F / ‖B‖_F`.
pub fn relative_frobenius_error(a: &CMat, b: &CMat) -> f64 {
    frobenius(&(a - b)) / frobenius(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, Complex64::new(s, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, seed: u64) -> CMat {
        CMat::from_fn(rows, cols, |i, j| {
            let x = ((i * 31 + j * 17) as u64 ^ seed) as f64;
            cplx((x * 0.37).sin(), (x * 0.11).cos())
        })
    }

    #[test]
    fn fast_products_match_naive() {
        let a = sample(40, 33, 1);
        let b = sample(33, 21, 2);
        let fast = matmul(&a, &b);
        assert!(relative_frobenius_error(&fast, &(&a * &b)) < 1e-13);

        let c = sample(40, 21, 3);
        let fast = adjoint_mul(&a, &c);
        assert!(relative_frobenius_error(&fast, &a.ad_mul(&c)) < 1e-13);
    }

    #[test]
    fn trace_product_matches_full_product() {
        let a = sample(12, 9, 4);
        let b = sample(9, 12, 5);
        let full = (&a * &b).trace();
        assert!((trace_product(&a, &b) - full).norm() < 1e-12 * full.norm().max(1.0));
    }

    #[test]
    fn hpd_inverse_rejects_indefinite() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![cplx(1.0, 0.0), cplx(-1.0, 0.0)]));
        assert!(hpd_inverse(&m, "test").is_err());
        let m = scaled_identity(3, 4.0);
        let inv = hpd_inverse(&m, "test").unwrap();
        assert!(relative_frobenius_error(&inv, &scaled_identity(3, 0.25)) < 1e-15);
    }
}
