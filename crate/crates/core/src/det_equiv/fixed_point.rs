//! Resolvent fixed point
//!
//! ```text
//! T = ((1/N) Σ_i Φ_i / (1 + u_i) + S + α I)⁻¹,   u_k = (1/N) tr Φ_k T,
//! ```
//!
//! iterated from `u⁽⁰⁾ = 1/α`. Then `(1/N) tr Q (B + αI)⁻¹ ≈ (1/N) tr Q T`
//! for `B = (1/N) Ĥ Ĥᴴ + S` with independent columns `ĥ_i ~ CN(0, Φ_i)`.

use log::warn;

use super::derivative::ResolventSystem;
use super::operator::Operator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once `max_i |u_i⁽ᵗ⁾ − u_i⁽ᵗ⁻¹⁾| / |u_i⁽ᵗ⁾|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

const BURN_IN: usize = 10;

/// Iterate `u ← step(u)` to a relative sup-norm tolerance.
pub(crate) fn iterate(
    mut u: Vec<f64>,
    options: &SolverOptions,
    label: &str,
    mut step: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, usize, f64)> {
    if u.is_empty() {
        return Ok((u, 0, 0.0));
    }
    let mut previous = f64::INFINITY;
    let mut warned = false;
    let mut residual = f64::INFINITY;
    for it in 1..=options.max_iter {
        let next = step(&u)?;
        residual = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            break;
        }
        u = next;
        if residual < options.tol {
            return Ok((u, it, residual));
        }
        if it > BURN_IN && residual > previous && !warned {
            warn!("{label}: residual increased at iteration {it} ({previous:e} -> {residual:e})");
            warned = true;
        }
        previous = residual;
    }
    Err(Error::NoConvergence {
        iterations: options.max_iter,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution<O> {
    pub u: Vec<f64>,
    pub t: O,
    pub iterations: usize,
    pub residual: f64,
    pub alpha: f64,
    pub phi: Vec<O>,
    pub s: O,
}

impl<O: Operator> FixedPointSolution<O> {
    /// `1 + u_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.u.iter().map(|u| 1.0 + u).collect()
    }

    pub fn system(&self) -> ResolventSystem<'_, O> {
        ResolventSystem {
            phi: &self.phi,
            t: &self.t,
            weights: self.weights(),
        }
    }

    /// `(1/N) tr Q T`.
    pub fn normalized_trace(&self, q: &O) -> f64 {
        q.trace_product(&self.t).re / self.t.dim() as f64
    }
}

fn resolvent<O: Operator>(phi: &[O], s: &O, alpha: f64, u: &[f64]) -> Result<O> {
    let n = s.dim() as f64;
    let mut m = s.clone();
    m.add_scaled(&O::scaled_identity(s.dim(), 1.0), alpha);
    for (p, ui) in phi.iter().zip(u) {
        m.add_scaled(p, 1.0 / (n * (1.0 + ui)));
    }
    m.hpd_inverse("resolvent fixed point")
}

pub fn solve_fixed_point<O: Operator>(
    phi: &[O],
    s: &O,
    alpha: f64,
    options: &SolverOptions,
) -> Result<FixedPointSolution<O>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::AssumptionViolated {
            assumption: "α_j > 0",
            detail: format!("fixed point needs α > 0, got {alpha}"),
        });
    }
    let n = s.dim() as f64;
    let (u, iterations, residual) = iterate(vec![1.0 / alpha; phi.len()], options, "resolvent fixed point", |u| {
        let t = resolvent(phi, s, alpha, u)?;
        Ok(phi.iter().map(|p| p.trace_product(&t).re / n).collect())
    })?;
    let t = resolvent(phi, s, alpha, &u)?;
    Ok(FixedPointSolution {
        u,
        t,
        iterations,
        residual,
        alpha,
        phi: phi.to_vec(),
        s: s.clone(),
    })
}
