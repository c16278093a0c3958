//! Zero-regularization limit of the resolvent fixed point.
//!
//! With `u̲_i = lim α u_i` the limit system reads
//!
//! ```text
//! u̲_i = (1/N) tr Φ_i T̲,     T̲ = ((1/N) Σ_i Φ_i / u̲_i + I)⁻¹,
//! ```
//!
//! and the derivative system of [`super::derivative`] applies with weights
//! `w_i = u̲_i`.

use super::derivative::ResolventSystem;
use super::fixed_point::{iterate, SolverOptions};
use super::operator::Operator;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ZfLimitSolution<O> {
    pub u: Vec<f64>,
    pub t: O,
    pub iterations: usize,
    pub residual: f64,
    pub phi: Vec<O>,
}

impl<O: Operator> ZfLimitSolution<O> {
    pub fn system(&self) -> ResolventSystem<'_, O> {
        ResolventSystem {
            phi: &self.phi,
            t: &self.t,
            weights: self.u.clone(),
        }
    }
}

fn limit_resolvent<O: Operator>(phi: &[O], u: &[f64]) -> Result<O> {
    let n = phi[0].dim();
    let mut m = O::scaled_identity(n, 1.0);
    for (p, ui) in phi.iter().zip(u) {
        m.add_scaled(p, 1.0 / (n as f64 * ui));
    }
    m.hpd_inverse("zero-regularization fixed point")
}

pub fn solve_zf_limit<O: Operator>(phi: &[O], options: &SolverOptions) -> Result<ZfLimitSolution<O>> {
    let k = phi.len();
    if k == 0 {
        return Err(Error::AssumptionViolated {
            assumption: "A2",
            detail: "no UEs".into(),
        });
    }
    let n = phi[0].dim();
    if n <= k {
        return Err(Error::AssumptionViolated {
            assumption: "A2",
            detail: format!("ZF limit needs N > K, got N = {n}, K = {k}"),
        });
    }
    let nf = n as f64;
    let scale: Vec<f64> = phi.iter().map(|p| p.trace().re / nf).collect();
    let u0: Vec<f64> = scale.iter().map(|c| c * (1.0 - k as f64 / nf)).collect();
    let collapse = |u: &[f64]| -> Result<()> {
        match u.iter().zip(&scale).position(|(u, c)| !(*u > 1e-12 * c)) {
            Some(i) => Err(Error::AssumptionViolated {
                assumption: "A2",
                detail: format!("u̲_{i} collapsed to zero; N = {n} is too close to K = {k}"),
            }),
            None => Ok(()),
        }
    };
    collapse(&u0)?;
    let (u, iterations, residual) = iterate(u0, options, "zero-regularization fixed point", |u| {
        let t = limit_resolvent(phi, u)?;
        let next: Vec<f64> = phi.iter().map(|p| p.trace_product(&t).re / nf).collect();
        collapse(&next)?;
        Ok(next)
    })?;
    let t = limit_resolvent(phi, &u)?;
    Ok(ZfLimitSolution {
        u,
        t,
        iterations,
        residual,
        phi: phi.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det_equiv::fixed_point::solve_fixed_point;
    use crate::det_equiv::operator::DiagonalOp;
    use crate::linalg::{self, CMat};
    use crate::rng::{self, complex_normal, Domain};

    #[test]
    fn uncorrelated_solution_is_one_minus_load() {
        let n = 40;
        let c = [0.5, 1.0, 2.0, 3.0, 0.1, 7.0, 1.5, 0.9];
        let phi: Vec<DiagonalOp> = c.iter().map(|&ci| DiagonalOp(vec![ci; n])).collect();
        let sol = solve_zf_limit(&phi, &SolverOptions::default()).unwrap();
        for (u, ci) in sol.u.iter().zip(c) {
            assert!((u / ci - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_square_systems() {
        let phi = vec![DiagonalOp(vec![1.0; 8]); 8];
        let err = solve_zf_limit(&phi, &SolverOptions::default()).unwrap_err();
        assert!(err.to_string().contains("A2"));
    }

    #[test]
    fn alpha_limit_extrapolates() {
        let n = 24;
        let mut r = rng::stream(4, Domain::Synthetic, 0);
        let phi: Vec<CMat> = (0..6)
            .map(|_| {
                let a = CMat::from_fn(n, n / 2, |_, _| complex_normal(&mut r));
                linalg::hermitize(&(&a * a.adjoint())) * linalg::cplx(2.0 / n as f64, 0.0)
            })
            .collect();
        let lim = solve_zf_limit(&phi, &SolverOptions::default()).unwrap();
        let s = CMat::zeros(n, n);
        for alpha in [1e-3, 1e-4, 1e-5] {
            let fp = solve_fixed_point(&phi, &s, alpha, &SolverOptions::default()).unwrap();
            for (u, ul) in fp.u.iter().zip(&lim.u) {
                let rel = (alpha * u / ul - 1.0).abs();
                assert!(rel < 0.005, "α = {alpha}: {rel}");
            }
        }
    }
}
