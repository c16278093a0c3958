//! Per-cell deterministic-equivalent quantities.
//!
//! All link matrices factor as `Φ_ljk = d_ljk P_lk` and `Θ_ljk = d_ljk R`, so
//! every trace needed by the SINR formulas reduces to a handful of per-cell
//! traces against `R` and `P_lk`, scaled by gains at assembly time.

use super::derivative::DerivativeSystem;
use super::fixed_point::{solve_fixed_point, SolverOptions};
use super::operator::{DiagonalOp, Operator};
use super::zf_limit::solve_zf_limit;
use crate::channel::ChannelStatistics;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::precoder::{Regularizer, RzfParams};

/// Operators of one cell `l`.
#[derive(Debug, Clone)]
pub struct CellOps<O> {
    /// Spatial matrix `R`.
    pub r: O,
    /// `P_lk` per pilot `k`.
    pub p: Vec<O>,
    /// `Φ_lli = d_lli P_li`.
    pub phi: Vec<O>,
}

impl CellOps<DiagonalOp> {
    pub fn spectral(stats: &ChannelStatistics, l: usize) -> Self {
        let p: Vec<DiagonalOp> = (0..stats.users())
            .map(|k| DiagonalOp(stats.p_spectrum(l, k).to_vec()))
            .collect();
        let phi = p
            .iter()
            .enumerate()
            .map(|(i, pi)| pi.scale(stats.gains().get(l, l, i)))
            .collect();
        Self {
            r: DiagonalOp(stats.r_spectrum().to_vec()),
            p,
            phi,
        }
    }
}

impl CellOps<CMat> {
    pub fn dense(stats: &ChannelStatistics, l: usize) -> Self {
        let basis = stats.basis();
        let p: Vec<CMat> = (0..stats.users()).map(|k| basis.dense(stats.p_spectrum(l, k))).collect();
        let phi = p
            .iter()
            .enumerate()
            .map(|(i, pi)| pi.scale(stats.gains().get(l, l, i)))
            .collect();
        Self {
            r: basis.dense(stats.r_spectrum()),
            p,
            phi,
        }
    }
}

/// Quantities of a ZF or RZF cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCell {
    /// `u_li` (RZF) or `u̲_li` (ZF).
    pub u: Vec<f64>,
    /// `1 + u_li` (RZF) or `u̲_li` (ZF).
    pub w: Vec<f64>,
    /// `(1/N) tr P_lk T`; the cross term is `u_ljk = d_ljk · cross[k]`.
    pub cross: Vec<f64>,
    /// `(1/N) tr R T′_{Φ_lli}`.
    pub tr_r: Vec<f64>,
    /// `tr_p[k][i] = (1/N) tr P_lk T′_{Φ_lli}`.
    pub tr_p: Vec<Vec<f64>>,
    /// Normalization weights per UE, VN then MN.
    pub vn: Vec<f64>,
    pub mn: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Quantities of an MRT cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MrtCell {
    /// `(1/N) tr Φ_lli`.
    pub phi_tr: Vec<f64>,
    /// `(1/N) tr R Φ_lli`.
    pub r_phi: Vec<f64>,
    /// `(1/N) tr P_lk`.
    pub p_tr: Vec<f64>,
    pub vn: Vec<f64>,
    pub mn: Vec<f64>,
}

fn normalized_trace<O: Operator>(a: &O, b: &O) -> f64 {
    a.trace_product(b).re / a.dim() as f64
}

pub fn mrt_cell<O: Operator>(ops: &CellOps<O>) -> MrtCell {
    let n = ops.r.dim() as f64;
    let phi_tr: Vec<f64> = ops.phi.iter().map(|p| p.trace().re / n).collect();
    let k = phi_tr.len() as f64;
    let lambda = k / phi_tr.iter().sum::<f64>();
    MrtCell {
        r_phi: ops.phi.iter().map(|p| normalized_trace(&ops.r, p)).collect(),
        p_tr: ops.p.iter().map(|p| p.trace().re / n).collect(),
        vn: phi_tr.iter().map(|t| 1.0 / t).collect(),
        mn: vec![lambda; phi_tr.len()],
        phi_tr,
    }
}

/// Traces shared by ZF and RZF once `T` and its derivative system are known.
fn linear_traces<O: Operator>(ops: &CellOps<O>, t: &O, sys: &DerivativeSystem<O>) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let n = ops.r.dim() as f64;
    let k = ops.phi.len();
    let cross = ops.p.iter().map(|p| normalized_trace(p, t)).collect();
    // Traces against T Φ_t T, reused for every Ω = Φ_i.
    let r_m: Vec<f64> = (0..k).map(|t| ops.r.trace_product(sys.t_phi_t(t)).re).collect();
    let p_m: Vec<Vec<f64>> = ops
        .p
        .iter()
        .map(|p| (0..k).map(|t| p.trace_product(sys.t_phi_t(t)).re).collect())
        .collect();
    let mut tr_r = vec![0.0; k];
    let mut tr_p = vec![vec![0.0; k]; k];
    for i in 0..k {
        let v = sys.rhs(&ops.phi, sys.t_phi_t(i));
        let c = sys.coefficients(&sys.solve_rhs(&v)?);
        let combine = |row: &[f64]| (row[i] + row.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()) / n;
        tr_r[i] = combine(&r_m);
        for kk in 0..k {
            tr_p[kk][i] = combine(&p_m[kk]);
        }
    }
    Ok((cross, tr_r, tr_p))
}

pub fn rzf_cell<O: Operator>(ops: &CellOps<O>, params: &RzfParams, solver: &SolverOptions) -> Result<LinearCell> {
    let dim = ops.r.dim();
    let n = dim as f64;
    let k = ops.phi.len();
    let s = match &params.z {
        Regularizer::Zero => O::scaled_identity(dim, 0.0),
        Regularizer::ScaledIdentity(z) => O::scaled_identity(dim, z / n),
        Regularizer::Dense(z) => O::from_dense(&(z * crate::linalg::cplx(1.0 / n, 0.0))).ok_or_else(|| {
            Error::Inapplicable {
                engine: "DE".into(),
                reason: "a general leverage matrix Z needs the dense backend".into(),
            }
        })?,
    };
    let fp = solve_fixed_point(&ops.phi, &s, params.alpha, solver)?;
    let sys = DerivativeSystem::new(&fp.system())?;
    let (cross, tr_r, tr_p) = linear_traces(ops, &fp.t, &sys)?;
    let w = fp.weights();

    // T′_I for both normalizations.
    let t_sq = sys.sandwich(&O::scaled_identity(dim, 1.0));
    let u_prime = sys.solve_rhs(&sys.rhs(&ops.phi, &t_sq))?;
    let t_prime_i = sys.t_prime(&u_prime, &t_sq);
    let vn = ops
        .phi
        .iter()
        .zip(&w)
        .map(|(p, wi)| wi * wi / normalized_trace(p, &t_prime_i))
        .collect();
    let mut shift = s.clone();
    shift.add_scaled(&O::scaled_identity(dim, 1.0), params.alpha);
    let lambda = (k as f64 / n) / (fp.t.trace().re / n - normalized_trace(&shift, &t_prime_i));
    Ok(LinearCell {
        u: fp.u.clone(),
        w,
        cross,
        tr_r,
        tr_p,
        vn,
        mn: vec![lambda; k],
        iterations: fp.iterations,
        residual: fp.residual,
    })
}

pub fn zf_cell<O: Operator>(ops: &CellOps<O>, solver: &SolverOptions) -> Result<LinearCell> {
    let lim = solve_zf_limit(&ops.phi, solver)?;
    let sys = DerivativeSystem::new(&lim.system())?;
    let (cross, tr_r, tr_p) = linear_traces(ops, &lim.t, &sys)?;
    let k = lim.u.len();
    let lambda = k as f64 / lim.u.iter().map(|u| 1.0 / u).sum::<f64>();
    Ok(LinearCell {
        w: lim.u.clone(),
        vn: lim.u.clone(),
        mn: vec![lambda; k],
        u: lim.u,
        cross,
        tr_r,
        tr_p,
        iterations: lim.iterations,
        residual: lim.residual,
    })
}
