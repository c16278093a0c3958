//! Monte Carlo estimation of the ergodic SINR and its decomposition.
//!
//! For UE `k` of cell `j` the achievable SINR is
//!
//! ```text
//! γ_jk = |E[h_jjkᴴ g_jk]|² / (σ²/ρ_dl + Σ_{l,i} E|h_ljkᴴ g_li|² − |E[h_jjkᴴ g_jk]|²)
//! ```
//!
//! Expectations run over channel realizations for a fixed scenario. The
//! normalization weights come from a first, independent pass over the same
//! distribution; the SINR terms come from a second pass.
//!
//! Per UE the second pass records the features
//! `x = [S, |Y_j|², Re Y_0, Im Y_0, …, Re Y_{L−1}, Im Y_{L−1}]` where
//! `Y_l = h_ljkᴴ f_lk` and `S = Σ_{l,i} w_li |h_ljkᴴ f_li|²`. Every breakdown
//! component is a smooth function of `E[x]`, and standard errors follow from
//! the sample covariance of `x` by the delta method.

use std::io::Write;

use log::debug;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{compute_statistics, draw_channels_with, ChannelStatistics};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::precoder::{self, build_directions, ColumnPowerEstimator, Direction, PrecoderConfig};
use crate::rng::{self, Domain};
use crate::scenario::Scenario;
use crate::sinr::SinrBreakdown;

const BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl McOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// Standard errors of the estimated components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ComponentErrors {
    pub signal: f64,
    pub variance: f64,
    pub noncoherent_interference: f64,
    pub pilot_contamination: f64,
    pub sinr: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeEstimate {
    pub cell: usize,
    pub ue: usize,
    pub breakdown: SinrBreakdown,
    pub stderr: ComponentErrors,
    /// `Σ_{l,i} w_li E|h_ljkᴴ f_li|²`, the full interference sum including
    /// the own signal, for decomposition checks.
    pub total_received: f64,
}

impl UeEstimate {
    pub fn sinr(&self) -> f64 {
        self.breakdown.sinr()
    }

    pub fn rate(&self) -> f64 {
        self.breakdown.rate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub config: PrecoderConfig,
    pub trials: usize,
    pub cells: usize,
    pub users: usize,
    /// Indexed `j·K + k`.
    pub ues: Vec<UeEstimate>,
    /// Normalization weights `w[l][i]` from the first pass.
    pub weights: Vec<Vec<f64>>,
    /// Second-pass mean of `tr G_l G_lᴴ` per cell.
    pub cell_power: Vec<f64>,
}

impl McEstimate {
    pub fn ue(&self, cell: usize, ue: usize) -> &UeEstimate {
        &self.ues[cell * self.users + ue]
    }

    pub fn cell(&self, cell: usize) -> &[UeEstimate] {
        &self.ues[cell * self.users..(cell + 1) * self.users]
    }
}

/// `Σ_k log₂(1 + γ_jk)` for cell `j`.
pub fn sum_rate(estimate: &McEstimate, cell: usize) -> f64 {
    estimate.cell(cell).iter().map(UeEstimate::rate).sum()
}

pub fn estimate_sinr(
    scenario: &Scenario,
    config: &PrecoderConfig,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    let mut v = estimate_sinr_many(scenario, std::slice::from_ref(config), &McOptions::new(trials, seed))?;
    Ok(v.remove(0))
}

/// Estimate several configurations from one shared set of channel draws.
pub fn estimate_sinr_many(
    scenario: &Scenario,
    configs: &[PrecoderConfig],
    options: &McOptions,
) -> Result<Vec<McEstimate>> {
    if options.trials < 2 {
        return Err(invalid("trials", "need at least 2 trials"));
    }
    for c in configs {
        c.validate(scenario.antennas(), scenario.users())?;
    }
    let stats = compute_statistics(scenario)?;
    let run = || -> Result<Vec<McEstimate>> { Engine::new(scenario, &stats, configs, options).run() };
    match options.threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| invalid("threads", e.to_string()))?
            .install(run),
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    stats: &'a ChannelStatistics,
    configs: &'a [PrecoderConfig],
    directions: Vec<Direction>,
    /// Direction index of each config.
    config_direction: Vec<usize>,
    options: &'a McOptions,
}

/// Sample mean and co-moment matrix of a feature vector.
#[derive(Debug, Clone)]
struct Moments {
    n: usize,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Moments {
    fn from_samples(samples: &[Vec<f64>], dim: usize) -> Self {
        let n = samples.len();
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, x) in mean.iter_mut().zip(s) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut comoment = vec![0.0; dim * dim];
        for s in samples {
            for a in 0..dim {
                let da = s[a] - mean[a];
                for b in 0..dim {
                    comoment[a * dim + b] += da * (s[b] - mean[b]);
                }
            }
        }
        Self { n, mean, comoment }
    }

    fn merge(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let dim = self.mean.len();
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(a, d)| a + d * nb / n as f64).collect();
        let mut comoment: Vec<f64> = self.comoment.iter().zip(&other.comoment).map(|(a, b)| a + b).collect();
        let f = na * nb / n as f64;
        for a in 0..dim {
            for b in 0..dim {
                comoment[a * dim + b] += delta[a] * delta[b] * f;
            }
        }
        Self { n, mean, comoment }
    }

    /// Variance of the gradient-weighted sample mean.
    fn mean_variance(&self, grad: &[f64]) -> f64 {
        let dim = self.mean.len();
        let mut q = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                q += grad[a] * self.comoment[a * dim + b] * grad[b];
            }
        }
        (q / ((self.n - 1) as f64 * self.n as f64)).max(0.0)
    }
}

/// Second-pass block result: moments per (config, UE) and power sums per (config, cell).
#[derive(Debug, Clone)]
struct TermBlock {
    moments: Vec<Vec<Moments>>,
    power: Vec<Vec<f64>>,
}

impl TermBlock {
    fn merge(&self, other: &Self) -> Self {
        Self {
            moments: self
                .moments
                .iter()
                .zip(&other.moments)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.merge(y)).collect())
                .collect(),
            power: self
                .power
                .iter()
                .zip(&other.power)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }
}

/// Pairwise reduction in a fixed order, independent of scheduling.
fn tree_reduce<T>(mut items: Vec<T>, merge: impl Fn(&T, &T) -> T) -> T {
    assert!(!items.is_empty());
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(&a, &b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop().unwrap()
}

impl<'a> Engine<'a> {
    fn new(
        scenario: &'a Scenario,
        stats: &'a ChannelStatistics,
        configs: &'a [PrecoderConfig],
        options: &'a McOptions,
    ) -> Self {
        let mut directions: Vec<Direction> = Vec::new();
        let config_direction = configs
            .iter()
            .map(|c| match directions.iter().position(|d| *d == c.direction) {
                Some(i) => i,
                None => {
                    directions.push(c.direction.clone());
                    directions.len() - 1
                }
            })
            .collect();
        Self {
            scenario,
            stats,
            configs,
            directions,
            config_direction,
            options,
        }
    }

    fn blocks(&self) -> Vec<(usize, usize)> {
        (0..self.options.trials)
            .step_by(BLOCK)
            .map(|s| (s, (s + BLOCK).min(self.options.trials)))
            .collect()
    }

    /// Channel draw of `trial` in `domain` and the directions `F_l` for every
    /// distinct precoding rule: `result[d][l]`.
    fn trial(&self, domain: Domain, trial: usize) -> Result<(Vec<CMat>, Vec<Vec<CMat>>)> {
        let mut rng = rng::stream(self.options.seed, domain, trial as u64);
        let draw = draw_channels_with(self.scenario, self.stats, &mut rng);
        let f = self
            .directions
            .iter()
            .map(|d| draw.h_hat.iter().map(|hh| build_directions(hh, d)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok((draw.h, f))
    }

    fn run(&self) -> Result<Vec<McEstimate>> {
        let cells = self.stats.cells();
        let users = self.stats.users();

        // Pass 1: expected squared column norms per (direction, cell).
        let pass1 = self
            .blocks()
            .into_par_iter()
            .map(|(start, end)| -> Result<Vec<Vec<ColumnPowerEstimator>>> {
                let mut acc = vec![vec![ColumnPowerEstimator::new(users); cells]; self.directions.len()];
                for t in start..end {
                    let (_, f) = self.trial(Domain::Normalization, t)?;
                    for (acc_d, f_d) in acc.iter_mut().zip(&f) {
                        for (a, fl) in acc_d.iter_mut().zip(f_d) {
                            a.add(fl);
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let powers = tree_reduce(pass1, |a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| {
                    x.iter()
                        .zip(y)
                        .map(|(p, q)| {
                            let mut m = p.clone();
                            m.merge(q);
                            m
                        })
                        .collect()
                })
                .collect()
        });
        let weights: Vec<Vec<Vec<f64>>> = self
            .configs
            .iter()
            .zip(&self.config_direction)
            .map(|(c, &d)| {
                powers[d]
                    .iter()
                    .map(|p| precoder::normalize(&p.means(), c.normalization))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        debug!("normalization pass done: {} directions", self.directions.len());

        // Pass 2: SINR features.
        let dim = 2 * cells + 2;
        let pass2 = self
            .blocks()
            .into_par_iter()
            .map(|(start, end)| -> Result<TermBlock> {
                let mut samples = vec![vec![Vec::with_capacity(end - start); cells * users]; self.configs.len()];
                let mut power = vec![vec![0.0; cells]; self.configs.len()];
                for t in start..end {
                    let (h, f) = self.trial(Domain::SinrTerms, t)?;
                    // x[d][l] = H_lᴴ F_l: entry (j·K + k, i) is h_ljkᴴ f_li.
                    let x: Vec<Vec<CMat>> = f
                        .iter()
                        .map(|fd| h.iter().zip(fd).map(|(hl, fl)| linalg::adjoint_mul(hl, fl)).collect())
                        .collect();
                    let col_pow: Vec<Vec<Vec<f64>>> =
                        f.iter().map(|fd| fd.iter().map(precoder::column_powers).collect()).collect();
                    for (c, &d) in self.config_direction.iter().enumerate() {
                        let w = &weights[c];
                        for l in 0..cells {
                            power[c][l] += w[l].iter().zip(&col_pow[d][l]).map(|(a, b)| a * b).sum::<f64>();
                        }
                        for j in 0..cells {
                            for k in 0..users {
                                let row = j * users + k;
                                let mut feat = vec![0.0; dim];
                                for l in 0..cells {
                                    let xl = &x[d][l];
                                    feat[0] += (0..users).map(|i| w[l][i] * xl[(row, i)].norm_sqr()).sum::<f64>();
                                    let y = xl[(row, k)];
                                    feat[2 + 2 * l] = y.re;
                                    feat[3 + 2 * l] = y.im;
                                    if l == j {
                                        feat[1] = y.norm_sqr();
                                    }
                                }
                                samples[c][row].push(feat);
                            }
                        }
                    }
                }
                Ok(TermBlock {
                    moments: samples
                        .iter()
                        .map(|per_ue| per_ue.iter().map(|s| Moments::from_samples(s, dim)).collect())
                        .collect(),
                    power,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let terms = tree_reduce(pass2, TermBlock::merge);

        let noise = self.scenario.power().downlink_noise();
        let trials = self.options.trials;
        Ok(self
            .configs
            .iter()
            .enumerate()
            .map(|(c, config)| {
                let w = &weights[c];
                let ues = (0..cells * users)
                    .map(|row| ue_estimate(&terms.moments[c][row], w, row / users, row % users, noise))
                    .collect();
                McEstimate {
                    config: config.clone(),
                    trials,
                    cells,
                    users,
                    ues,
                    weights: w.clone(),
                    cell_power: terms.power[c].iter().map(|p| p / trials as f64).collect(),
                }
            })
            .collect())
    }
}

fn ue_estimate(m: &Moments, w: &[Vec<f64>], j: usize, k: usize, noise: f64) -> UeEstimate {
    let dim = m.mean.len();
    let cells = (dim - 2) / 2;
    let mean = &m.mean;
    let coh = |l: usize| mean[2 + 2 * l].powi(2) + mean[3 + 2 * l].powi(2);
    let wj = w[j][k];

    let signal = wj * coh(j);
    let variance = (wj * (mean[1] - coh(j))).max(0.0);
    let pilot: f64 = (0..cells).filter(|&l| l != j).map(|l| w[l][k] * coh(l)).sum();
    let noncoherent = (mean[0] - wj * mean[1] - pilot).max(0.0);
    let breakdown = SinrBreakdown {
        signal,
        noise,
        variance,
        noncoherent_interference: noncoherent,
        pilot_contamination: pilot,
    };

    let mut g_signal = vec![0.0; dim];
    g_signal[2 + 2 * j] = 2.0 * wj * mean[2 + 2 * j];
    g_signal[3 + 2 * j] = 2.0 * wj * mean[3 + 2 * j];

    let mut g_variance = vec![0.0; dim];
    g_variance[1] = wj;
    g_variance[2 + 2 * j] = -g_signal[2 + 2 * j];
    g_variance[3 + 2 * j] = -g_signal[3 + 2 * j];

    let mut g_pilot = vec![0.0; dim];
    for l in (0..cells).filter(|&l| l != j) {
        g_pilot[2 + 2 * l] = 2.0 * w[l][k] * mean[2 + 2 * l];
        g_pilot[3 + 2 * l] = 2.0 * w[l][k] * mean[3 + 2 * l];
    }

    let mut g_noncoherent: Vec<f64> = g_pilot.iter().map(|g| -g).collect();
    g_noncoherent[0] = 1.0;
    g_noncoherent[1] = -wj;

    let mut g_denominator = vec![0.0; dim];
    g_denominator[0] = 1.0;
    g_denominator[2 + 2 * j] = -g_signal[2 + 2 * j];
    g_denominator[3 + 2 * j] = -g_signal[3 + 2 * j];

    let denominator = breakdown.interference_plus_noise();
    let gamma = signal / denominator;
    let g_sinr: Vec<f64> = g_signal
        .iter()
        .zip(&g_denominator)
        .map(|(s, d)| (s - gamma * d) / denominator)
        .collect();
    let rate_scale = 1.0 / ((1.0 + gamma) * std::f64::consts::LN_2);
    let g_rate: Vec<f64> = g_sinr.iter().map(|g| g * rate_scale).collect();

    let se = |g: &[f64]| m.mean_variance(g).sqrt();
    UeEstimate {
        cell: j,
        ue: k,
        breakdown,
        stderr: ComponentErrors {
            signal: se(&g_signal),
            variance: se(&g_variance),
            noncoherent_interference: se(&g_noncoherent),
            pilot_contamination: se(&g_pilot),
            sinr: se(&g_sinr),
            rate: se(&g_rate),
        },
        total_received: mean[0],
    }
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    cell: usize,
    ue: usize,
    scheme: &'a str,
    normalization: &'a str,
    engine: &'a str,
    signal: f64,
    noise: f64,
    variance: f64,
    noncoherent_interference: f64,
    pilot_contamination: f64,
    sinr: f64,
    rate: f64,
    trials: usize,
    stderr_signal: f64,
    stderr_variance: f64,
    stderr_noncoherent_interference: f64,
    stderr_pilot_contamination: f64,
    stderr_sinr: f64,
    stderr_rate: f64,
}

/// One CSV row per UE with the breakdown, trial count and standard errors.
pub fn write_csv<W: Write>(estimates: &[McEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in estimates {
        for u in &e.ues {
            let b = &u.breakdown;
            w.serialize(CsvRow {
                cell: u.cell,
                ue: u.ue,
                scheme: e.config.scheme().as_str(),
                normalization: e.config.normalization.as_str(),
                engine: "MC",
                signal: b.signal,
                noise: b.noise,
                variance: b.variance,
                noncoherent_interference: b.noncoherent_interference,
                pilot_contamination: b.pilot_contamination,
                sinr: b.sinr(),
                rate: b.rate(),
                trials: e.trials,
                stderr_signal: u.stderr.signal,
                stderr_variance: u.stderr.variance,
                stderr_noncoherent_interference: u.stderr.noncoherent_interference,
                stderr_pilot_contamination: u.stderr.pilot_contamination,
                stderr_sinr: u.stderr.sinr,
                stderr_rate: u.stderr.rate,
            })?;
        }
    }
    w.flush().map_err(Error::Io)
}
