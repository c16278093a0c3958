//! Closed-form SINRs for uncorrelated fading (`Θ_ljk = d_ljk I`), the
//! single-cell ZF sum-rate gap between the two normalizations, and the
//! pilot-contamination-to-interference-plus-noise ratio.
//!
//! Breakdowns are reported in received-power units (noise `σ²/ρ_dl`), like
//! the other engines. The closed forms do not separate the beamforming
//! variance from the rest of the interference, so `variance` is always zero
//! and the whole term sits in `noncoherent_interference`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::precoder::{Normalization, Scheme};
use crate::scenario::{CorrelationModel, LargeScale, PowerConfig, Scenario};
use crate::sinr::SinrBreakdown;

#[derive(Debug, Clone, PartialEq)]
pub struct UncorrelatedInputs {
    pub gains: LargeScale,
    /// `α_lk = Σ_n d_lnk + σ²/ρ_tr`, indexed `[l][k]`.
    pub alpha: Vec<Vec<f64>>,
    /// `1 − K/N`.
    pub u_bar: f64,
    pub antennas: usize,
    pub power: PowerConfig,
}

impl UncorrelatedInputs {
    pub fn new(antennas: usize, gains: LargeScale, power: PowerConfig) -> Result<Self> {
        let users = gains.users();
        if antennas == 0 || users == 0 {
            return Err(invalid("antennas", "need N ≥ 1 and K ≥ 1"));
        }
        let alpha = (0..gains.cells())
            .map(|l| (0..users).map(|k| gains.pilot_sum(l, k) + power.training_noise()).collect())
            .collect();
        Ok(Self {
            u_bar: 1.0 - users as f64 / antennas as f64,
            gains,
            alpha,
            antennas,
            power,
        })
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        if scenario.correlation() != CorrelationModel::Uncorrelated {
            return Err(Error::Inapplicable {
                engine: "ClosedForm".into(),
                reason: "closed forms assume uncorrelated fading".into(),
            });
        }
        Self::new(scenario.antennas(), scenario.gains().clone(), *scenario.power())
    }

    pub fn cells(&self) -> usize {
        self.gains.cells()
    }

    pub fn users(&self) -> usize {
        self.gains.users()
    }

    fn load(&self) -> f64 {
        self.users() as f64 / self.antennas as f64
    }

    /// `σ²/(Nρ_dl)`.
    fn noise(&self) -> f64 {
        self.power.downlink_noise() / self.antennas as f64
    }
}

/// Noise and interference shared by both normalizations: `ν_jk` for ZF,
/// `ϑ_jk` for MRT.
fn aggregate(inputs: &UncorrelatedInputs, zf: bool, j: usize, k: usize) -> (f64, f64) {
    let g = &inputs.gains;
    let interference = inputs.load()
        * (0..inputs.cells())
            .map(|l| {
                let d = g.get(l, j, k);
                if zf {
                    d * (1.0 - d / inputs.alpha[l][k])
                } else {
                    d
                }
            })
            .sum::<f64>();
    (inputs.noise(), interference)
}

fn breakdown(n: f64, signal: f64, noise: f64, interference: f64, pilot: f64) -> SinrBreakdown {
    SinrBreakdown {
        signal,
        noise,
        variance: 0.0,
        noncoherent_interference: interference,
        pilot_contamination: pilot,
    }
    .scaled(n)
}

/// Per-UE ZF breakdowns, indexed `j·K + k`.
pub fn zf_closed_form(inputs: &UncorrelatedInputs, normalization: Normalization) -> Result<Vec<SinrBreakdown>> {
    let (cells, users) = (inputs.cells(), inputs.users());
    if inputs.antennas <= users {
        return Err(Error::AssumptionViolated {
            assumption: "A2/A4",
            detail: format!("ZF needs N > K, got N = {}, K = {users}", inputs.antennas),
        });
    }
    let g = &inputs.gains;
    let u = inputs.u_bar;
    let lambda: Vec<f64> = (0..cells)
        .map(|l| {
            let mean = (0..users).map(|i| inputs.alpha[l][i] / g.get(l, l, i).powi(2)).sum::<f64>() / users as f64;
            u / mean
        })
        .collect();
    let n = inputs.antennas as f64;
    let mut out = Vec::with_capacity(cells * users);
    for j in 0..cells {
        for k in 0..users {
            let (noise, interference) = aggregate(inputs, true, j, k);
            let others = (0..cells).filter(|&l| l != j);
            let (signal, pilot) = match normalization {
                Normalization::Vector => (
                    g.get(j, j, k).powi(2) / inputs.alpha[j][k] * u,
                    others.map(|l| u * g.get(l, j, k).powi(2) / inputs.alpha[l][k]).sum(),
                ),
                Normalization::Matrix => (
                    lambda[j],
                    others.map(|l| lambda[l] * (g.get(l, j, k) / g.get(l, l, k)).powi(2)).sum(),
                ),
            };
            out.push(breakdown(n, signal, noise, interference, pilot));
        }
    }
    Ok(out)
}

/// Per-UE MRT breakdowns, indexed `j·K + k`.
pub fn mrt_closed_form(inputs: &UncorrelatedInputs, normalization: Normalization) -> Vec<SinrBreakdown> {
    let (cells, users) = (inputs.cells(), inputs.users());
    let g = &inputs.gains;
    let theta: Vec<f64> = (0..cells)
        .map(|l| {
            let mean = (0..users).map(|i| g.get(l, l, i).powi(2) / inputs.alpha[l][i]).sum::<f64>() / users as f64;
            1.0 / mean
        })
        .collect();
    let n = inputs.antennas as f64;
    let mut out = Vec::with_capacity(cells * users);
    for j in 0..cells {
        for k in 0..users {
            let (noise, interference) = aggregate(inputs, false, j, k);
            let others = (0..cells).filter(|&l| l != j);
            let own = g.get(j, j, k).powi(2) / inputs.alpha[j][k];
            let (signal, pilot) = match normalization {
                Normalization::Vector => (own, others.map(|l| g.get(l, j, k).powi(2) / inputs.alpha[l][k]).sum()),
                Normalization::Matrix => (
                    theta[j] * own * own,
                    others
                        .map(|l| theta[l] * (g.get(l, l, k) * g.get(l, j, k) / inputs.alpha[l][k]).powi(2))
                        .sum(),
                ),
            };
            out.push(breakdown(n, signal, noise, interference, pilot));
        }
    }
    out
}

/// Single-cell ZF sum rates in the high training-SNR regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateGap {
    /// `r_VN − r_MN`, bit/s/Hz.
    pub delta: f64,
    pub vn_sum_rate: f64,
    pub mn_sum_rate: f64,
}

/// Sum-rate advantage of VN over MN for single-cell ZF with gains `d`.
///
/// `high_training_snr` asserts `ρ_tr ≫ 1`, under which `α_k ≈ d_k`; the
/// result is meaningless otherwise and is refused.
pub fn sum_rate_gap(d: &[f64], antennas: usize, power: &PowerConfig, high_training_snr: bool) -> Result<SumRateGap> {
    if !high_training_snr {
        return Err(Error::Inapplicable {
            engine: "ClosedForm".into(),
            reason: "the sum-rate gap needs the high training-SNR regime".into(),
        });
    }
    let k = d.len();
    if k == 0 || antennas <= k {
        return Err(Error::AssumptionViolated {
            assumption: "A2/A4",
            detail: format!("ZF needs N > K ≥ 1, got N = {antennas}, K = {k}"),
        });
    }
    if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("d", "gains must be positive and finite"));
    }
    let log2_1p = |x: f64| x.ln_1p() / std::f64::consts::LN_2;
    let u_bar = 1.0 - k as f64 / antennas as f64;
    // c = σ²/(N ρ_dl ū)
    let c = power.downlink_noise() / (antennas as f64 * u_bar);
    let harmonic = d.iter().map(|v| 1.0 / v).sum::<f64>() / k as f64;
    let vn: f64 = d.iter().map(|v| log2_1p(1.0 / (c / v))).sum();
    let mn = k as f64 * log2_1p(1.0 / (c * harmonic));
    Ok(SumRateGap {
        delta: vn - mn,
        vn_sum_rate: vn,
        mn_sum_rate: mn,
    })
}

/// Per-UE SINRs `(N − K)ρ_dl d_k/σ²` (VN) and `(N − K)ρ_dl/σ² · (mean 1/d)⁻¹` (MN).
pub fn single_cell_zf_sinr(d: &[f64], antennas: usize, power: &PowerConfig, normalization: Normalization) -> Vec<f64> {
    let scale = (antennas as f64 - d.len() as f64) / power.downlink_noise();
    match normalization {
        Normalization::Vector => d.iter().map(|v| scale * v).collect(),
        Normalization::Matrix => {
            let mean = d.iter().map(|v| 1.0 / v).sum::<f64>() / d.len() as f64;
            vec![scale / mean; d.len()]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PcinrRegion {
    /// Pilot contamination below a tenth of the rest of the denominator.
    Negligible = 1,
    Comparable = 2,
    /// Pilot contamination dominates.
    Dominant = 3,
}

impl PcinrRegion {
    pub fn classify(pcinr: f64) -> Self {
        if pcinr < 0.1 {
            PcinrRegion::Negligible
        } else if pcinr > 1.0 {
            PcinrRegion::Dominant
        } else {
            PcinrRegion::Comparable
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcinrReport {
    pub scheme: Scheme,
    pub normalization: Normalization,
    pub value: f64,
    pub region: PcinrRegion,
}

/// `pilot / (noise + noncoherent + variance)`.
pub fn pcinr_value(b: &SinrBreakdown) -> Result<f64> {
    if !b.is_nonnegative() {
        return Err(invalid("breakdown", "components must be nonnegative"));
    }
    let den = b.noise + b.noncoherent_interference + b.variance;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("PCINR with zero noise and interference"));
    }
    Ok(b.pilot_contamination / den)
}

pub fn pcinr(b: &SinrBreakdown, scheme: Scheme, normalization: Normalization) -> Result<PcinrReport> {
    let value = pcinr_value(b)?;
    Ok(PcinrReport {
        scheme,
        normalization,
        value,
        region: PcinrRegion::classify(value),
    })
}

/// Ratio of total pilot contamination to total noise plus interference over
/// a set of UEs.
pub fn aggregate_pcinr<'a>(breakdowns: impl IntoIterator<Item = &'a SinrBreakdown>) -> Result<f64> {
    let (mut pilot, mut rest) = (0.0, 0.0);
    for b in breakdowns {
        if !b.is_nonnegative() {
            return Err(invalid("breakdown", "components must be nonnegative"));
        }
        pilot += b.pilot_contamination;
        rest += b.noise + b.noncoherent_interference + b.variance;
    }
    if rest == 0.0 {
        return Err(Error::ZeroDenominator("PCINR with zero noise and interference"));
    }
    Ok(pilot / rest)
}
