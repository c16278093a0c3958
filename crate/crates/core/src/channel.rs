//! MMSE channel estimation statistics and channel realizations.
//!
//! Every link matrix is `Θ_ljk = d_ljk R` with a spatial matrix `R` shared by
//! all links. All derived second-order statistics are therefore functions of
//! `R` and diagonal in its eigenbasis `R = U diag(λ) Uᴴ`:
//!
//! * `Q_lk = (s_lk R + (σ²/ρ_tr) I)⁻¹` with `s_lk = Σ_j d_ljk`,
//! * `W_lk = Θ_llk Q_lk` (the MMSE estimator applied to the training observation),
//! * `Φ_ljk = Θ_llk Q_lk Θ_ljk = d_ljk P_lk` with `P_lk = W_lk R`.
//!
//! The statistics store the spectra of `Q`, `W` and `P`, and dense matrices
//! are rebuilt on request.

use rand::Rng;

use crate::error::Result;
use crate::linalg::{self, cplx, CMat};
use crate::rng::{self, complex_normal, Domain};
use crate::scenario::{LargeScale, Scenario, SpatialShape};

/// Orthonormal basis diagonalizing `R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Standard,
    Unitary(CMat),
}

impl Basis {
    /// `U diag(values) Uᴴ`.
    pub fn dense(&self, values: &[f64]) -> CMat {
        match self {
            Basis::Standard => CMat::from_diagonal(&linalg::CVec::from_iterator(
                values.len(),
                values.iter().map(|&v| cplx(v, 0.0)),
            )),
            Basis::Unitary(u) => {
                let mut scaled = u.clone();
                for (mut col, &v) in scaled.column_iter_mut().zip(values) {
                    col *= cplx(v, 0.0);
                }
                linalg::matmul(&scaled, &u.adjoint())
            }
        }
    }

    /// `Uᴴ X`.
    pub fn to_basis(&self, x: &CMat) -> CMat {
        match self {
            Basis::Standard => x.clone(),
            Basis::Unitary(u) => linalg::adjoint_mul(u, x),
        }
    }

    /// `U X`.
    pub fn from_basis(&self, x: &CMat) -> CMat {
        match self {
            Basis::Standard => x.clone(),
            Basis::Unitary(u) => linalg::matmul(u, x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    n: usize,
    cells: usize,
    users: usize,
    gains: LargeScale,
    basis: Basis,
    r: Vec<f64>,
    q: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

pub fn compute_statistics(scenario: &Scenario) -> Result<ChannelStatistics> {
    let n = scenario.antennas();
    let (basis, r) = match scenario.shape() {
        SpatialShape::Identity => (Basis::Standard, vec![1.0; n]),
        SpatialShape::Steering { gram, .. } => {
            let eig = nalgebra::SymmetricEigen::new(gram.clone());
            let values = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
            (Basis::Unitary(eig.eigenvectors), values)
        }
    };
    let (cells, users) = (scenario.cells(), scenario.users());
    let gains = scenario.gains().clone();
    let c = scenario.power().training_noise();
    let mut q = Vec::with_capacity(cells * users);
    let mut w = Vec::with_capacity(cells * users);
    let mut p = Vec::with_capacity(cells * users);
    for l in 0..cells {
        for k in 0..users {
            let s = gains.pilot_sum(l, k);
            let own = gains.get(l, l, k);
            let ql: Vec<f64> = r.iter().map(|&lam| 1.0 / (s * lam + c)).collect();
            let wl: Vec<f64> = r.iter().zip(&ql).map(|(&lam, &qv)| own * lam * qv).collect();
            let pl: Vec<f64> = r.iter().zip(&wl).map(|(&lam, &wv)| wv * lam).collect();
            q.push(ql);
            w.push(wl);
            p.push(pl);
        }
    }
    Ok(ChannelStatistics {
        n,
        cells,
        users,
        gains,
        basis,
        r,
        q,
        w,
        p,
    })
}

impl ChannelStatistics {
    pub fn antennas(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn gains(&self) -> &LargeScale {
        &self.gains
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Eigenvalues of `R`.
    pub fn r_spectrum(&self) -> &[f64] {
        &self.r
    }

    pub fn q_spectrum(&self, l: usize, k: usize) -> &[f64] {
        &self.q[l * self.users + k]
    }

    pub fn estimator_spectrum(&self, l: usize, k: usize) -> &[f64] {
        &self.w[l * self.users + k]
    }

    /// Spectrum of `P_lk`, so that `Φ_ljk = d_ljk P_lk`.
    pub fn p_spectrum(&self, l: usize, k: usize) -> &[f64] {
        &self.p[l * self.users + k]
    }

    pub fn q(&self, l: usize, k: usize) -> CMat {
        self.basis.dense(self.q_spectrum(l, k))
    }

    pub fn estimator(&self, l: usize, k: usize) -> CMat {
        self.basis.dense(self.estimator_spectrum(l, k))
    }

    pub fn theta(&self, l: usize, j: usize, k: usize) -> CMat {
        let d = self.gains.get(l, j, k);
        self.basis.dense(&self.r.iter().map(|v| v * d).collect::<Vec<_>>())
    }

    pub fn phi(&self, l: usize, j: usize, k: usize) -> CMat {
        let d = self.gains.get(l, j, k);
        self.basis
            .dense(&self.p_spectrum(l, k).iter().map(|v| v * d).collect::<Vec<_>>())
    }

    /// `tr Φ_ljk`.
    pub fn phi_trace(&self, l: usize, j: usize, k: usize) -> f64 {
        self.gains.get(l, j, k) * self.p_spectrum(l, k).iter().sum::<f64>()
    }
}

/// One realization of every true channel and every own-cell MMSE estimate.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    users: usize,
    /// `h[l]` is N × LK; column `j·K + k` is `h_ljk`.
    pub h: Vec<CMat>,
    /// `h_hat[l]` is N × K; column `k` is `ĥ_llk`.
    pub h_hat: Vec<CMat>,
    pub seed: u64,
}

impl ChannelDraw {
    pub fn h(&self, l: usize, j: usize, k: usize) -> linalg::CVec {
        self.h[l].column(j * self.users + k).into_owned()
    }

    pub fn h_hat(&self, l: usize, k: usize) -> linalg::CVec {
        self.h_hat[l].column(k).into_owned()
    }
}

/// Draw channels from the seeded stream `(seed, Channel, 0)`.
pub fn draw_channels(scenario: &Scenario, stats: &ChannelStatistics, seed: u64) -> ChannelDraw {
    let mut rng = rng::stream(seed, Domain::Channel, 0);
    let mut draw = draw_channels_with(scenario, stats, &mut rng);
    draw.seed = seed;
    draw
}

/// Draw channels from a caller-provided generator.
///
/// For every BS `l`: `h_ljk = √d_ljk · F z_ljk` with `F` the square-root
/// factor of `R`, the training observation `y_lk = Σ_j h_ljk + n_lk/√ρ_tr`
/// with `n_lk ~ CN(0, σ² I)`, and `ĥ_llk = W_lk y_lk`.
pub fn draw_channels_with<R: Rng + ?Sized>(
    scenario: &Scenario,
    stats: &ChannelStatistics,
    rng: &mut R,
) -> ChannelDraw {
    let (n, cells, users) = (stats.n, stats.cells, stats.users);
    let noise_std = scenario.power().training_noise().sqrt();
    let mut h = Vec::with_capacity(cells);
    let mut h_hat = Vec::with_capacity(cells);
    for l in 0..cells {
        let mut z = CMat::from_fn(n, cells * users, |_, _| complex_normal(rng));
        for j in 0..cells {
            for k in 0..users {
                let s = stats.gains.get(l, j, k).sqrt();
                z.column_mut(j * users + k).scale_mut(s);
            }
        }
        let hl = match scenario.shape() {
            SpatialShape::Identity => z,
            SpatialShape::Steering { factor, .. } => linalg::matmul(factor, &z),
        };
        let mut y = CMat::from_fn(n, users, |_, _| complex_normal(rng) * noise_std);
        for j in 0..cells {
            y += hl.columns(j * users, users);
        }
        let mut y = stats.basis.to_basis(&y);
        for k in 0..users {
            for (v, &wv) in y.column_mut(k).iter_mut().zip(stats.estimator_spectrum(l, k)) {
                *v *= wv;
            }
        }
        h_hat.push(stats.basis.from_basis(&y));
        h.push(hl);
    }
    ChannelDraw {
        users,
        h,
        h_hat,
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CorrelationModel, PowerConfig};

    fn scenario(
        cells: usize,
        users: usize,
        n: usize,
        model: CorrelationModel,
        rho_tr: f64,
        f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Scenario {
        let gains = LargeScale::from_fn(cells, users, f);
        Scenario::from_gains(n, gains, PowerConfig::new(rho_tr, 1.0, 1.0).unwrap(), model).unwrap()
    }

    const STEER: CorrelationModel = CorrelationModel::SteeringVector {
        antenna_spacing: 0.3,
    };

    #[test]
    fn single_cell_identity_statistics() {
        let s = scenario(1, 1, 4, CorrelationModel::Uncorrelated, 1.0, |_, _, _| 1.0);
        let st = compute_statistics(&s).unwrap();
        assert!(linalg::relative_frobenius_error(&st.q(0, 0), &linalg::scaled_identity(4, 0.5)) < 1e-15);
        assert!(linalg::relative_frobenius_error(&st.phi(0, 0, 0), &linalg::scaled_identity(4, 0.5)) < 1e-15);
    }

    #[test]
    fn perfect_training_recovers_theta() {
        let s = scenario(1, 2, 6, STEER, 1e12, |_, _, k| 1.0 + k as f64);
        let st = compute_statistics(&s).unwrap();
        for k in 0..2 {
            // Φ → Θ on the range of R; R is full rank here.
            assert!(linalg::relative_frobenius_error(&st.phi(0, 0, k), &st.theta(0, 0, k)) < 1e-6);
        }
    }

    #[test]
    fn two_cell_uncorrelated_phi() {
        let (a, b) = (2.0, 0.5);
        let s = scenario(2, 1, 3, CorrelationModel::Uncorrelated, 4.0, |_, j, _| if j == 0 { a } else { b });
        let st = compute_statistics(&s).unwrap();
        let alpha = a + b + 0.25;
        let expected = linalg::scaled_identity(3, a * a / alpha);
        assert!(linalg::relative_frobenius_error(&st.phi(0, 0, 0), &expected) < 1e-14);
        let cross = linalg::scaled_identity(3, a * b / alpha);
        assert!(linalg::relative_frobenius_error(&st.phi(0, 1, 0), &cross) < 1e-14);
    }

    #[test]
    fn spectral_statistics_match_direct_formulas() {
        let s = scenario(2, 2, 8, STEER, 2.0, |l, j, k| 0.3 + 0.7 * l as f64 + 0.2 * j as f64 + 0.1 * k as f64);
        let st = compute_statistics(&s).unwrap();
        let theta = crate::scenario::build_theta(&s);
        for l in 0..2 {
            for k in 0..2 {
                let mut sum = linalg::scaled_identity(8, s.power().training_noise());
                for j in 0..2 {
                    sum += theta.matrix(l, j, k);
                }
                let q = linalg::hpd_inverse(&sum, "test").unwrap();
                assert!(linalg::relative_frobenius_error(&st.q(l, k), &q) < 1e-9);
                for j in 0..2 {
                    let phi = theta.matrix(l, l, k) * &q * theta.matrix(l, j, k);
                    assert!(linalg::relative_frobenius_error(&st.phi(l, j, k), &phi) < 1e-9);
                    assert!((st.phi_trace(l, j, k) - phi.trace().re).abs() < 1e-9 * phi.trace().re);
                }
                let eig = linalg::hermitian_eigenvalues(&st.phi(l, l, k));
                assert!(eig[0] >= -1e-10 * eig[7]);
            }
        }
    }

    fn sample_covariance(columns: &[linalg::CVec]) -> CMat {
        let n = columns[0].len();
        let mut c = CMat::zeros(n, n);
        for v in columns {
            c += v * v.adjoint();
        }
        c / cplx(columns.len() as f64, 0.0)
    }

    #[test]
    fn draws_follow_second_order_statistics() {
        let s = scenario(2, 2, 6, STEER, 2.0, |l, j, k| 1.0 + 0.5 * ((l + j + k) % 2) as f64);
        let st = compute_statistics(&s).unwrap();
        let mut rng = rng::stream(3, Domain::Synthetic, 0);
        let draws: Vec<_> = (0..10_000).map(|_| draw_channels_with(&s, &st, &mut rng)).collect();
        let h: Vec<_> = draws.iter().map(|d| d.h(0, 1, 1)).collect();
        assert!(linalg::relative_frobenius_error(&sample_covariance(&h), &st.theta(0, 1, 1)) < 0.05);
        let hh: Vec<_> = draws.iter().map(|d| d.h_hat(1, 0)).collect();
        assert!(linalg::relative_frobenius_error(&sample_covariance(&hh), &st.phi(1, 1, 0)) < 0.05);

        // Estimation error is uncorrelated with the estimate.
        let mut cross = CMat::zeros(6, 6);
        for d in &draws {
            let e = d.h(1, 1, 0) - d.h_hat(1, 0);
            cross += e * d.h_hat(1, 0).adjoint();
        }
        cross /= cplx(draws.len() as f64, 0.0);
        assert!(linalg::frobenius(&cross) < 0.05 * linalg::frobenius(&st.phi(1, 1, 0)));

        // Pilot contamination: the estimate at BS 0 of pilot 1 correlates with
        // the channel of the same-pilot UE in cell 1.
        let mut contam = CMat::zeros(6, 6);
        for d in &draws {
            contam += d.h_hat(0, 1) * d.h(0, 1, 1).adjoint();
        }
        contam /= cplx(draws.len() as f64, 0.0);
        assert!(linalg::relative_frobenius_error(&contam, &st.phi(0, 1, 1)) < 0.05);
    }

    #[test]
    fn draws_are_seeded() {
        let s = scenario(2, 2, 4, CorrelationModel::Uncorrelated, 1.0, |_, _, _| 1.0);
        let st = compute_statistics(&s).unwrap();
        let (a, b) = (draw_channels(&s, &st, 5), draw_channels(&s, &st, 5));
        assert_eq!(a.h, b.h);
        assert_eq!(a.h_hat, b.h_hat);
        assert_ne!(a.h, draw_channels(&s, &st, 6).h);
    }

    #[test]
    fn steering_square_root_factor() {
        let s = scenario(1, 1, 10, STEER, 1.0, |_, _, _| 3.0);
        let theta = crate::scenario::build_theta(&s);
        let f = theta.sqrt_factor(0, 0, 0);
        assert!(linalg::relative_frobenius_error(&linalg::matmul(&f, &f.adjoint()), &theta.matrix(0, 0, 0)) < 1e-8);
    }
}
