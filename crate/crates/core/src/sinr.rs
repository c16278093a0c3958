//! Per-UE decomposition of the ergodic downlink SINR.

use serde::{Deserialize, Serialize};

/// Powers entering `γ = signal / (noise + variance + noncoherent + pilot)`.
///
/// Every engine reports received-power units, so the noise term is always
/// `σ²/ρ_dl` and breakdowns from different engines are directly comparable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub signal: f64,
    pub noise: f64,
    pub variance: f64,
    pub noncoherent_interference: f64,
    pub pilot_contamination: f64,
}

impl SinrBreakdown {
    pub fn interference_plus_noise(&self) -> f64 {
        self.noise + self.variance + self.noncoherent_interference + self.pilot_contamination
    }

    pub fn sinr(&self) -> f64 {
        self.signal / self.interference_plus_noise()
    }

    /// `log₂(1 + γ)` in bit/s/Hz.
    pub fn rate(&self) -> f64 {
        self.sinr().ln_1p() / std::f64::consts::LN_2
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            signal: self.signal * c,
            noise: self.noise * c,
            variance: self.variance * c,
            noncoherent_interference: self.noncoherent_interference * c,
            pilot_contamination: self.pilot_contamination * c,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        [
            self.signal,
            self.noise,
            self.variance,
            self.noncoherent_interference,
            self.pilot_contamination,
        ]
        .iter()
        .all(|v| *v >= 0.0)
    }
}

/// `Σ log₂(1 + γ)`.
pub fn sum_rate<'a>(breakdowns: impl IntoIterator<Item = &'a SinrBreakdown>) -> f64 {
    breakdowns.into_iter().map(SinrBreakdown::rate).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_unit_sinr_is_one_bit() {
        let b = SinrBreakdown {
            signal: 2.0,
            noise: 1.0,
            variance: 0.5,
            noncoherent_interference: 0.25,
            pilot_contamination: 0.25,
        };
        assert_eq!(b.sinr(), 1.0);
        assert!((b.rate() - 1.0).abs() < 1e-15);
        assert!((sum_rate(&[b; 8]) - 8.0).abs() < 1e-12);
        let zero = SinrBreakdown { signal: 0.0, ..b };
        assert_eq!(sum_rate(&[zero; 8]), 0.0);
    }

    #[test]
    fn scaling_preserves_sinr() {
        let b = SinrBreakdown {
            signal: 3.0,
            noise: 0.1,
            variance: 0.2,
            noncoherent_interference: 0.3,
            pilot_contamination: 0.4,
        };
        assert!((b.scaled(7.5).sinr() - b.sinr()).abs() < 1e-14);
    }
}
