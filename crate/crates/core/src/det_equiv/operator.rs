//! Matrix backends for the fixed-point solvers.
//!
//! The solvers only need sums, products, Hermitian inverses and traces.
//! [`CMat`] handles arbitrary Hermitian inputs. [`DiagonalOp`] handles the
//! common case where every input is diagonal in one shared orthonormal basis,
//! and turns every operation into O(N) work.

use std::fmt::Debug;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, cplx, CMat};

pub trait Operator: Clone + Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn scaled_identity(n: usize, s: f64) -> Self;
    fn scale(&self, c: f64) -> Self;
    /// `self += c · other`.
    fn add_scaled(&mut self, other: &Self, c: f64);
    fn mul(&self, other: &Self) -> Self;
    fn hpd_inverse(&self, context: &'static str) -> Result<Self>;
    fn trace(&self) -> Complex64;
    fn trace_product(&self, other: &Self) -> Complex64;
    fn to_dense(&self) -> CMat;
    /// The backend representation of a standard-basis matrix, if it has one.
    fn from_dense(m: &CMat) -> Option<Self>;
}

/// Real diagonal operator in an implicit orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOp(pub Vec<f64>);

impl Operator for DiagonalOp {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn scaled_identity(n: usize, s: f64) -> Self {
        DiagonalOp(vec![s; n])
    }

    fn scale(&self, c: f64) -> Self {
        DiagonalOp(self.0.iter().map(|v| v * c).collect())
    }

    fn add_scaled(&mut self, other: &Self, c: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    fn mul(&self, other: &Self) -> Self {
        DiagonalOp(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    fn hpd_inverse(&self, context: &'static str) -> Result<Self> {
        let max = self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if self.0.iter().any(|&v| !(v > 1e-300 && v > 1e-15 * max)) {
            return Err(Error::NotPositiveDefinite(context));
        }
        Ok(DiagonalOp(self.0.iter().map(|v| 1.0 / v).collect()))
    }

    fn trace(&self) -> Complex64 {
        cplx(self.0.iter().sum(), 0.0)
    }

    fn trace_product(&self, other: &Self) -> Complex64 {
        cplx(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum(), 0.0)
    }

    fn to_dense(&self) -> CMat {
        CMat::from_diagonal(&linalg::CVec::from_iterator(
            self.0.len(),
            self.0.iter().map(|&v| cplx(v, 0.0)),
        ))
    }

    fn from_dense(_: &CMat) -> Option<Self> {
        None
    }
}

impl Operator for CMat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn scaled_identity(n: usize, s: f64) -> Self {
        linalg::scaled_identity(n, s)
    }

    fn scale(&self, c: f64) -> Self {
        self * cplx(c, 0.0)
    }

    fn add_scaled(&mut self, other: &Self, c: f64) {
        self.zip_apply(other, |a, b| *a += b * c);
    }

    fn mul(&self, other: &Self) -> Self {
        linalg::matmul(self, other)
    }

    fn hpd_inverse(&self, context: &'static str) -> Result<Self> {
        Ok(linalg::hermitize(&linalg::hpd_inverse(self, context)?))
    }

    fn trace(&self) -> Complex64 {
        CMat::trace(self)
    }

    fn trace_product(&self, other: &Self) -> Complex64 {
        linalg::trace_product(self, other)
    }

    fn to_dense(&self) -> CMat {
        self.clone()
    }

    fn from_dense(m: &CMat) -> Option<Self> {
        Some(m.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matches_dense() {
        let a = DiagonalOp(vec![1.0, 2.0, 4.0]);
        let b = DiagonalOp(vec![0.5, 3.0, 1.0]);
        let (da, db) = (a.to_dense(), b.to_dense());
        assert_eq!(a.mul(&b).to_dense(), Operator::mul(&da, &db));
        assert!((a.trace_product(&b) - Operator::trace_product(&da, &db)).norm() < 1e-14);
        let inv = Operator::hpd_inverse(&da, "test").unwrap();
        assert!(linalg::relative_frobenius_error(&a.hpd_inverse("test").unwrap().to_dense(), &inv) < 1e-15);
        let mut c = a.clone();
        c.add_scaled(&b, 2.0);
        let mut dc = da.clone();
        dc.add_scaled(&db, 2.0);
        assert_eq!(c.to_dense(), dc);
        assert!(DiagonalOp(vec![1.0, 0.0]).hpd_inverse("test").is_err());
    }
}
