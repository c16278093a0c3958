//! Derivative equivalents of the resolvent fixed point.
//!
//! For a Hermitian `Ω`,
//!
//! ```text
//! T′_Ω = T ((1/N) Σ_i u′_i Φ_i / w_i² + Ω) T,     u′ = (I − J)⁻¹ v_Ω,
//! J_ni = tr(Φ_n T Φ_i T) / (N² w_i²),              (v_Ω)_t = (1/N) tr Φ_t T Ω T,
//! ```
//!
//! with `w_i = 1 + u_i` for the regularized resolvent and `w_i = u̲_i` in the
//! zero-regularization limit. Then
//! `(1/N) tr Q (B + αI)⁻¹ Ω (B + αI)⁻¹ ≈ (1/N) tr Q T′_Ω`.

use nalgebra::{Dyn, LU};

use super::fixed_point::FixedPointSolution;
use super::operator::Operator;
use crate::error::{Error, Result};
use crate::linalg::RMat;

/// The inputs shared by both derivative systems.
#[derive(Debug, Clone)]
pub struct ResolventSystem<'a, O> {
    pub phi: &'a [O],
    pub t: &'a O,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DerivativeSolution<O> {
    pub u_prime: Vec<f64>,
    pub v: Vec<f64>,
    pub t_prime: O,
}

/// One factorization of `I − J` reused for every right-hand side.
#[derive(Debug, Clone)]
pub struct DerivativeSystem<O> {
    n: usize,
    weights: Vec<f64>,
    t: O,
    /// `T Φ_i T`.
    m: Vec<O>,
    j: RMat,
    lu: LU<f64, Dyn, Dyn>,
}

impl<O: Operator> DerivativeSystem<O> {
    pub fn new(system: &ResolventSystem<'_, O>) -> Result<Self> {
        let k = system.phi.len();
        let n = system.t.dim();
        let nf = n as f64;
        let m: Vec<O> = system.phi.iter().map(|p| system.t.mul(p).mul(system.t)).collect();
        let j = RMat::from_fn(k, k, |row, col| {
            system.phi[row].trace_product(&m[col]).re / (nf * nf * system.weights[col].powi(2))
        });
        let lu = (RMat::identity(k, k) - &j).lu();
        let pivots = lu.u().diagonal();
        let largest = pivots.iter().fold(1.0f64, |a, p| a.max(p.abs()));
        if pivots.iter().any(|p| !(p.abs() > 1e-12 * largest)) {
            return Err(Error::Singular(format!(
                "I − J is numerically singular ({k}×{k}); the system is near-critical"
            )));
        }
        Ok(Self {
            n,
            weights: system.weights.clone(),
            t: system.t.clone(),
            m,
            j,
            lu,
        })
    }

    pub fn j(&self) -> &RMat {
        &self.j
    }

    /// `T Φ_i T`.
    pub fn t_phi_t(&self, i: usize) -> &O {
        &self.m[i]
    }

    /// `T Ω T`.
    pub fn sandwich(&self, omega: &O) -> O {
        self.t.mul(omega).mul(&self.t)
    }

    /// `(v_Ω)_t = (1/N) tr Φ_t (T Ω T)` given the sandwich `T Ω T`.
    pub fn rhs(&self, phi: &[O], sandwich: &O) -> Vec<f64> {
        phi.iter().map(|p| p.trace_product(sandwich).re / self.n as f64).collect()
    }

    pub fn solve_rhs(&self, v: &[f64]) -> Result<Vec<f64>> {
        let rhs = RMat::from_column_slice(v.len(), 1, v);
        let x = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("I − J".into()))?;
        Ok(x.iter().copied().collect())
    }

    /// `c_t = u′_t / (N w_t²)`, so that `T′_Ω = Σ_t c_t T Φ_t T + T Ω T`.
    pub fn coefficients(&self, u_prime: &[f64]) -> Vec<f64> {
        u_prime
            .iter()
            .zip(&self.weights)
            .map(|(up, w)| up / (self.n as f64 * w * w))
            .collect()
    }

    pub fn t_prime(&self, u_prime: &[f64], sandwich: &O) -> O {
        let mut out = sandwich.clone();
        for (m, c) in self.m.iter().zip(self.coefficients(u_prime)) {
            out.add_scaled(m, c);
        }
        out
    }

    pub fn solve(&self, phi: &[O], omega: &O) -> Result<DerivativeSolution<O>> {
        let sandwich = self.sandwich(omega);
        let v = self.rhs(phi, &sandwich);
        let u_prime = self.solve_rhs(&v)?;
        let t_prime = self.t_prime(&u_prime, &sandwich);
        Ok(DerivativeSolution { u_prime, v, t_prime })
    }
}

pub fn solve_derivative<O: Operator>(fixed_point: &FixedPointSolution<O>, omega: &O) -> Result<DerivativeSolution<O>> {
    DerivativeSystem::new(&fixed_point.system())?.solve(&fixed_point.phi, omega)
}
