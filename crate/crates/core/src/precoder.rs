//! Linear precoding directions and their power normalization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, cplx, CMat};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "MRT")]
    Mrt,
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "RZF")]
    Rzf,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Mrt, Scheme::Zf, Scheme::Rzf];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mrt => "MRT",
            Scheme::Zf => "ZF",
            Scheme::Rzf => "RZF",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Normalization {
    /// Per-UE scaling, `d_jk = 1/E‖f_jk‖²`.
    #[serde(rename = "VN")]
    Vector,
    /// One scalar per cell, `η_j = K/E[tr F Fᴴ]`.
    #[serde(rename = "MN")]
    Matrix,
}

impl Normalization {
    pub const ALL: [Normalization; 2] = [Normalization::Vector, Normalization::Matrix];

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Vector => "VN",
            Normalization::Matrix => "MN",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The leverage matrix `Z` of the RZF precoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    ScaledIdentity(f64),
    Dense(CMat),
}

impl Regularizer {
    pub fn dense(&self, n: usize) -> CMat {
        match self {
            Regularizer::Zero => CMat::zeros(n, n),
            Regularizer::ScaledIdentity(s) => linalg::scaled_identity(n, *s),
            Regularizer::Dense(z) => z.clone(),
        }
    }

    /// Scalar `s` when `Z = s I`.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Regularizer::Zero => Some(0.0),
            Regularizer::ScaledIdentity(s) => Some(*s),
            Regularizer::Dense(_) => None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Regularizer::Zero => Ok(()),
            Regularizer::ScaledIdentity(s) if *s >= 0.0 && s.is_finite() => Ok(()),
            Regularizer::ScaledIdentity(_) => Err(invalid("Z", "must be Hermitian PSD")),
            Regularizer::Dense(z) => {
                if z.nrows() != n || z.ncols() != n {
                    return Err(invalid("Z", format!("must be {n}×{n}")));
                }
                let scale = linalg::frobenius(z).max(f64::MIN_POSITIVE);
                if linalg::frobenius(&(z - z.adjoint())) > 1e-10 * scale {
                    return Err(invalid("Z", "must be Hermitian"));
                }
                let eig = linalg::hermitian_eigenvalues(z);
                if eig.first().is_some_and(|&e| e < -1e-10 * scale) {
                    return Err(invalid("Z", "must be positive semidefinite"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RzfParams {
    pub alpha: f64,
    pub z: Regularizer,
}

impl RzfParams {
    pub fn new(alpha: f64, z: Regularizer) -> Result<Self> {
        let p = Self { alpha, z };
        p.validate_alpha()?;
        Ok(p)
    }

    /// `Z = 0`, `α = σ²K/(Nρ_dl)`.
    pub fn default_for(scenario: &Scenario) -> Self {
        let alpha = scenario.power().downlink_noise() * scenario.users() as f64 / scenario.antennas() as f64;
        Self {
            alpha,
            z: Regularizer::Zero,
        }
    }

    fn validate_alpha(&self) -> Result<()> {
        if self.alpha.is_finite() && self.alpha > 0.0 {
            Ok(())
        } else {
            Err(Error::AssumptionViolated {
                assumption: "α_j > 0",
                detail: format!("RZF regularization α = {}", self.alpha),
            })
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.validate_alpha()?;
        self.z.validate(n)
    }
}

/// A precoding rule before normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    Mrt,
    Zf,
    Rzf(RzfParams),
}

impl Direction {
    pub fn scheme(&self) -> Scheme {
        match self {
            Direction::Mrt => Scheme::Mrt,
            Direction::Zf => Scheme::Zf,
            Direction::Rzf(_) => Scheme::Rzf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderConfig {
    pub direction: Direction,
    pub normalization: Normalization,
}

impl PrecoderConfig {
    pub fn mrt(normalization: Normalization) -> Self {
        Self {
            direction: Direction::Mrt,
            normalization,
        }
    }

    pub fn zf(normalization: Normalization) -> Self {
        Self {
            direction: Direction::Zf,
            normalization,
        }
    }

    pub fn rzf(normalization: Normalization, params: RzfParams) -> Self {
        Self {
            direction: Direction::Rzf(params),
            normalization,
        }
    }

    /// `scheme` with the scenario's default RZF parameters when needed.
    pub fn for_scenario(scheme: Scheme, normalization: Normalization, scenario: &Scenario) -> Self {
        match scheme {
            Scheme::Mrt => Self::mrt(normalization),
            Scheme::Zf => Self::zf(normalization),
            Scheme::Rzf => Self::rzf(normalization, RzfParams::default_for(scenario)),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.direction.scheme()
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.scheme(), self.normalization)
    }

    pub fn rzf_params(&self) -> Option<&RzfParams> {
        match &self.direction {
            Direction::Rzf(p) => Some(p),
            _ => None,
        }
    }

    /// Check the configuration against an `n`-antenna, `k`-UE cell.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        match &self.direction {
            Direction::Mrt => Ok(()),
            Direction::Zf if n <= k => Err(Error::AssumptionViolated {
                assumption: "A2/A4",
                detail: format!("ZF needs N > K, got N = {n}, K = {k}"),
            }),
            Direction::Zf => Ok(()),
            Direction::Rzf(p) => p.validate(n),
        }
    }
}

/// Unnormalized precoding matrix `F` (N × K) from the own-cell estimates `Ĥ`.
pub fn build_directions(h_hat: &CMat, direction: &Direction) -> Result<CMat> {
    let (n, k) = h_hat.shape();
    match direction {
        Direction::Mrt => Ok(h_hat.clone()),
        Direction::Zf => {
            let gram = linalg::hermitize(&linalg::adjoint_mul(h_hat, h_hat));
            let chol = linalg::cholesky(&gram).ok_or_else(|| Error::AssumptionViolated {
                assumption: "A4",
                detail: format!("rank(Ĥ) < K = {k}: the ZF Gram matrix is singular"),
            })?;
            Ok(linalg::matmul(h_hat, &chol.inverse()))
        }
        Direction::Rzf(p) => {
            p.validate_alpha()?;
            let mut m = linalg::matmul(h_hat, &h_hat.adjoint());
            match &p.z {
                Regularizer::Zero => {}
                Regularizer::ScaledIdentity(s) => m += linalg::scaled_identity(n, *s),
                Regularizer::Dense(z) => m += z,
            }
            for i in 0..n {
                m[(i, i)] += cplx(n as f64 * p.alpha, 0.0);
            }
            let chol = linalg::cholesky(&m).ok_or(Error::NotPositiveDefinite("RZF system matrix"))?;
            Ok(chol.solve(h_hat))
        }
    }
}

/// Squared column norms `‖f_i‖²`.
pub fn column_powers(f: &CMat) -> Vec<f64> {
    f.column_iter().map(|c| c.norm_squared()).collect()
}

/// Normalization weights from the expected squared column norms
/// `E‖f_i‖²`. VN gives `1/E‖f_i‖²` per column; MN gives `K/Σ_i E‖f_i‖²`
/// for every column.
pub fn normalize(expected_powers: &[f64], normalization: Normalization) -> Result<Vec<f64>> {
    if let Some(column) = expected_powers.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::ZeroNormColumn { column });
    }
    Ok(match normalization {
        Normalization::Vector => expected_powers.iter().map(|p| 1.0 / p).collect(),
        Normalization::Matrix => {
            let eta = expected_powers.len() as f64 / expected_powers.iter().sum::<f64>();
            vec![eta; expected_powers.len()]
        }
    })
}

/// Running mean of squared column norms across draws.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnPowerEstimator {
    sums: Vec<f64>,
    count: usize,
}

impl ColumnPowerEstimator {
    pub fn new(columns: usize) -> Self {
        Self {
            sums: vec![0.0; columns],
            count: 0,
        }
    }

    pub fn add(&mut self, f: &CMat) {
        for (s, p) in self.sums.iter_mut().zip(column_powers(f)) {
            *s += p;
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            *s += o;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn means(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.count as f64).collect()
    }
}

/// Normalized precoder of one cell: `G = F D^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeResult {
    pub f: CMat,
    pub d: Vec<f64>,
    pub g: CMat,
}

impl PrecodeResult {
    pub fn new(f: CMat, d: Vec<f64>) -> Self {
        let mut g = f.clone();
        for (mut col, w) in g.column_iter_mut().zip(&d) {
            col *= cplx(w.sqrt(), 0.0);
        }
        Self { f, d, g }
    }

    /// `tr G Gᴴ`.
    pub fn power(&self) -> f64 {
        linalg::frobenius(&self.g).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, complex_normal, Domain};

    fn random(n: usize, k: usize, seed: u64) -> CMat {
        let mut r = rng::stream(seed, Domain::Synthetic, 0);
        CMat::from_fn(n, k, |_, _| complex_normal(&mut r))
    }

    #[test]
    fn zf_inverts_the_estimate() {
        let h = random(12, 4, 1);
        let f = build_directions(&h, &Direction::Zf).unwrap();
        let prod = h.adjoint() * &f;
        assert!(linalg::frobenius(&(prod - linalg::identity(4))) < 1e-8);
    }

    #[test]
    fn zf_rank_deficient_is_rejected() {
        let mut h = random(6, 3, 2);
        let c0 = h.column(0).into_owned();
        h.set_column(2, &c0);
        let err = build_directions(&h, &Direction::Zf).unwrap_err();
        assert!(err.to_string().contains("A4"), "{err}");
    }

    #[test]
    fn rzf_tends_to_zf() {
        let h = random(16, 5, 3);
        let zf = build_directions(&h, &Direction::Zf).unwrap();
        let rzf = build_directions(&h, &Direction::Rzf(RzfParams::new(1e-8, Regularizer::Zero).unwrap())).unwrap();
        for i in 0..5 {
            let diff = (rzf.column(i) - zf.column(i)).norm() / zf.column(i).norm();
            assert!(diff < 1e-4, "column {i}: {diff}");
        }
    }

    #[test]
    fn rzf_requires_positive_alpha() {
        let err = RzfParams::new(0.0, Regularizer::Zero).unwrap_err();
        assert!(err.to_string().contains("α_j > 0"));
        let neg = Direction::Rzf(RzfParams {
            alpha: -1.0,
            z: Regularizer::Zero,
        });
        assert!(build_directions(&random(4, 2, 1), &neg).is_err());
    }

    #[test]
    fn rzf_with_dense_leverage_matches_direct_solve() {
        let h = random(8, 3, 4);
        let a = random(8, 8, 5);
        let z = linalg::hermitize(&(&a * a.adjoint()));
        let p = RzfParams::new(0.1, Regularizer::Dense(z.clone())).unwrap();
        let f = build_directions(&h, &Direction::Rzf(p)).unwrap();
        let m = &h * h.adjoint() + z + linalg::scaled_identity(8, 0.8);
        let direct = m.try_inverse().unwrap() * &h;
        assert!(linalg::relative_frobenius_error(&f, &direct) < 1e-10);
    }

    #[test]
    fn mrt_is_the_estimate() {
        let h = random(5, 2, 6);
        assert_eq!(build_directions(&h, &Direction::Mrt).unwrap(), h);
    }

    #[test]
    fn orthonormal_columns_give_unit_weights() {
        let f = linalg::identity(4).columns(0, 3).into_owned();
        let p = column_powers(&f);
        let vn = normalize(&p, Normalization::Vector).unwrap();
        let mn = normalize(&p, Normalization::Matrix).unwrap();
        assert_eq!(vn, vec![1.0; 3]);
        assert_eq!(mn, vec![1.0; 3]);
        assert_eq!(PrecodeResult::new(f.clone(), vn).g, PrecodeResult::new(f, mn).g);
    }

    #[test]
    fn two_ue_toy_normalization() {
        let f = CMat::from_diagonal(&linalg::CVec::from_vec(vec![cplx(1.0, 0.0), cplx(0.0, 2.0)]));
        let p = column_powers(&f);
        assert_eq!(p, vec![1.0, 4.0]);
        let vn = normalize(&p, Normalization::Vector).unwrap();
        assert_eq!(vn, vec![1.0, 0.25]);
        let mn = normalize(&p, Normalization::Matrix).unwrap();
        assert_eq!(mn, vec![0.4, 0.4]);
        let g_vn = PrecodeResult::new(f.clone(), vn);
        assert_eq!(column_powers(&g_vn.g), vec![1.0, 1.0]);
        let g_mn = PrecodeResult::new(f, mn);
        let q = column_powers(&g_mn.g);
        assert!((q[1] / q[0] - 4.0).abs() < 1e-12);
        assert!((g_mn.power() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_column_is_rejected() {
        assert!(matches!(
            normalize(&[1.0, 0.0], Normalization::Vector),
            Err(Error::ZeroNormColumn { column: 1 })
        ));
    }

    #[test]
    fn zf_needs_more_antennas_than_users() {
        let err = PrecoderConfig::zf(Normalization::Vector).validate(8, 8).unwrap_err();
        assert!(err.to_string().contains("A2"));
        assert!(PrecoderConfig::zf(Normalization::Vector).validate(9, 8).is_ok());
    }
}
