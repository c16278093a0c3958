//! Assembly of deterministic-equivalent SINR breakdowns.
//!
//! Terms are first formed in the normalized units of the large-system
//! formulas (noise `σ²/(Nρ_dl)`) and then multiplied by `N`, which puts them
//! in the received-power units of the Monte Carlo estimator.

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use super::fixed_point::SolverOptions;
use super::model::{mrt_cell, rzf_cell, zf_cell, CellOps, LinearCell, MrtCell};
use crate::channel::{compute_statistics, ChannelStatistics};
use crate::error::{Error, Result};
use crate::precoder::{Direction, Normalization, PrecoderConfig};
use crate::scenario::Scenario;
use crate::sinr::SinrBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Spectral when every operator shares the eigenbasis of `R`, dense otherwise.
    #[default]
    Auto,
    Spectral,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeOptions {
    pub solver: SolverOptions,
    pub backend: Backend,
}

/// Per-cell solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct DeSolution {
    pub cell: usize,
    /// `u_li` for RZF, `u̲_li` for ZF, empty for MRT.
    pub u: Vec<f64>,
    /// Normalization weights: `d_li` for VN, `λ_l` repeated for MN.
    pub normalization: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeSinr {
    pub config: PrecoderConfig,
    pub cells: usize,
    pub users: usize,
    /// Received-power units, indexed `j·K + k`.
    pub ues: Vec<SinrBreakdown>,
    /// The same breakdowns in the normalized units (`÷ N`).
    pub normalized: Vec<SinrBreakdown>,
    pub solutions: Vec<DeSolution>,
}

impl DeSinr {
    pub fn ue(&self, cell: usize, ue: usize) -> &SinrBreakdown {
        &self.ues[cell * self.users + ue]
    }

    pub fn cell(&self, cell: usize) -> &[SinrBreakdown] {
        &self.ues[cell * self.users..(cell + 1) * self.users]
    }

    pub fn sum_rate(&self, cell: usize) -> f64 {
        crate::sinr::sum_rate(self.cell(cell))
    }
}

#[derive(Debug, Clone)]
enum Cells {
    Mrt(Vec<MrtCell>),
    Linear(Vec<LinearCell>),
}

fn solve_cells(stats: &ChannelStatistics, direction: &Direction, options: &DeOptions) -> Result<Cells> {
    let dense_z = matches!(direction, Direction::Rzf(p) if p.z.as_scalar().is_none());
    let dense = match options.backend {
        Backend::Dense => true,
        Backend::Auto => dense_z,
        Backend::Spectral if dense_z => {
            return Err(Error::Inapplicable {
                engine: "DE".into(),
                reason: "the spectral backend needs Z = zI".into(),
            })
        }
        Backend::Spectral => false,
    };
    let cells: Vec<usize> = (0..stats.cells()).collect();
    macro_rules! per_cell {
        ($ops:expr) => {
            match direction {
                Direction::Mrt => Cells::Mrt(cells.iter().map(|&l| mrt_cell(&$ops(l))).collect()),
                Direction::Zf => Cells::Linear(
                    cells
                        .par_iter()
                        .map(|&l| zf_cell(&$ops(l), &options.solver))
                        .collect::<Result<_>>()?,
                ),
                Direction::Rzf(p) => Cells::Linear(
                    cells
                        .par_iter()
                        .map(|&l| rzf_cell(&$ops(l), p, &options.solver))
                        .collect::<Result<_>>()?,
                ),
            }
        };
    }
    Ok(if dense {
        per_cell!(|l| CellOps::dense(stats, l))
    } else {
        per_cell!(|l| CellOps::spectral(stats, l))
    })
}

fn clamp_epsilon(eps: f64, magnitude: f64) -> f64 {
    if eps >= 0.0 {
        return eps;
    }
    if -eps > 1e-8 * magnitude {
        warn!("negative interference term {eps:e} (scale {magnitude:e}) clamped to zero");
    }
    0.0
}

fn assemble_linear(
    stats: &ChannelStatistics,
    cells: &[LinearCell],
    normalization: Normalization,
    noise: f64,
) -> Vec<SinrBreakdown> {
    let (num_cells, users) = (stats.cells(), stats.users());
    let n = stats.antennas() as f64;
    let g = stats.gains();
    let weights = |l: usize| match normalization {
        Normalization::Vector => &cells[l].vn,
        Normalization::Matrix => &cells[l].mn,
    };
    let mut out = Vec::with_capacity(num_cells * users);
    for j in 0..num_cells {
        for k in 0..users {
            let own = &cells[j];
            let coherence = g.get(j, j, k) * own.cross[k] / own.w[k];
            let signal = weights(j)[k] * coherence * coherence;
            let (mut variance, mut noncoherent, mut pilot) = (0.0, 0.0, 0.0);
            for (l, cell) in cells.iter().enumerate() {
                let c = weights(l);
                let d = g.get(l, j, k);
                let u_cross = d * cell.cross[k];
                let wk = cell.w[k];
                if l != j {
                    pilot += c[k] * u_cross * u_cross / (wk * wk);
                }
                for i in 0..users {
                    let tp = cell.tr_p[k][i];
                    let a = d * cell.tr_r[i];
                    let b = u_cross * u_cross / (wk * wk) * g.get(l, l, k) * tp;
                    let cross = 2.0 / wk * u_cross * d * tp;
                    let eps = clamp_epsilon(a + b - cross, a + b);
                    let term = c[i] * eps / (n * cell.w[i] * cell.w[i]);
                    if l == j && i == k {
                        variance += term;
                    } else {
                        noncoherent += term;
                    }
                }
            }
            out.push(SinrBreakdown {
                signal,
                noise,
                variance,
                noncoherent_interference: noncoherent,
                pilot_contamination: pilot,
            });
        }
    }
    out
}

fn assemble_mrt(
    stats: &ChannelStatistics,
    cells: &[MrtCell],
    normalization: Normalization,
    noise: f64,
) -> Vec<SinrBreakdown> {
    let (num_cells, users) = (stats.cells(), stats.users());
    let n = stats.antennas() as f64;
    let g = stats.gains();
    let weights = |l: usize| match normalization {
        Normalization::Vector => &cells[l].vn,
        Normalization::Matrix => &cells[l].mn,
    };
    let mut out = Vec::with_capacity(num_cells * users);
    for j in 0..num_cells {
        for k in 0..users {
            let own = cells[j].phi_tr[k];
            let signal = weights(j)[k] * own * own;
            let (mut variance, mut noncoherent, mut pilot) = (0.0, 0.0, 0.0);
            for (l, cell) in cells.iter().enumerate() {
                let c = weights(l);
                let d = g.get(l, j, k);
                if l != j {
                    let coh = d * cell.p_tr[k];
                    pilot += c[k] * coh * coh;
                }
                for i in 0..users {
                    let term = c[i] * d * cell.r_phi[i] / n;
                    if l == j && i == k {
                        variance += term;
                    } else {
                        noncoherent += term;
                    }
                }
            }
            out.push(SinrBreakdown {
                signal,
                noise,
                variance,
                noncoherent_interference: noncoherent,
                pilot_contamination: pilot,
            });
        }
    }
    out
}

/// Deterministic equivalents of several configurations, solving each
/// distinct precoding rule once.
pub fn de_sinr_many(
    scenario: &Scenario,
    stats: &ChannelStatistics,
    configs: &[PrecoderConfig],
    options: &DeOptions,
) -> Result<Vec<DeSinr>> {
    let mut solved: Vec<(Direction, Cells)> = Vec::new();
    let n = stats.antennas() as f64;
    let noise = scenario.power().downlink_noise() / n;
    let mut out = Vec::with_capacity(configs.len());
    for config in configs {
        config.validate(stats.antennas(), stats.users())?;
        let idx = match solved.iter().position(|(d, _)| *d == config.direction) {
            Some(i) => i,
            None => {
                let cells = solve_cells(stats, &config.direction, options)?;
                solved.push((config.direction.clone(), cells));
                solved.len() - 1
            }
        };
        let (normalized, solutions) = match &solved[idx].1 {
            Cells::Mrt(cells) => (
                assemble_mrt(stats, cells, config.normalization, noise),
                cells
                    .iter()
                    .enumerate()
                    .map(|(l, c)| DeSolution {
                        cell: l,
                        u: Vec::new(),
                        normalization: pick(&c.vn, &c.mn, config.normalization),
                        iterations: 0,
                        residual: 0.0,
                    })
                    .collect::<Vec<_>>(),
            ),
            Cells::Linear(cells) => (
                assemble_linear(stats, cells, config.normalization, noise),
                cells
                    .iter()
                    .enumerate()
                    .map(|(l, c)| DeSolution {
                        cell: l,
                        u: c.u.clone(),
                        normalization: pick(&c.vn, &c.mn, config.normalization),
                        iterations: c.iterations,
                        residual: c.residual,
                    })
                    .collect(),
            ),
        };
        out.push(DeSinr {
            config: config.clone(),
            cells: stats.cells(),
            users: stats.users(),
            ues: normalized.iter().map(|b| b.scaled(n)).collect(),
            normalized,
            solutions,
        });
    }
    Ok(out)
}

fn pick(vn: &[f64], mn: &[f64], normalization: Normalization) -> Vec<f64> {
    match normalization {
        Normalization::Vector => vn.to_vec(),
        Normalization::Matrix => mn.to_vec(),
    }
}

/// Deterministic-equivalent SINR breakdown of every UE.
pub fn de_sinr(scenario: &Scenario, config: &PrecoderConfig, options: &DeOptions) -> Result<DeSinr> {
    let stats = compute_statistics(scenario)?;
    Ok(de_sinr_many(scenario, &stats, std::slice::from_ref(config), options)?.remove(0))
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
    trials: Option<usize>,
    stderr_signal: Option<f64>,
    stderr_variance: Option<f64>,
    stderr_noncoherent_interference: Option<f64>,
    stderr_pilot_contamination: Option<f64>,
    stderr_sinr: Option<f64>,
    stderr_rate: Option<f64>,
}

/// Same columns as the Monte Carlo CSV; the sampling columns are left empty.
pub fn write_csv<W: Write>(results: &[DeSinr], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        for (idx, b) in r.ues.iter().enumerate() {
            w.serialize(CsvRow {
                cell: idx / r.users,
                ue: idx % r.users,
                scheme: r.config.scheme().as_str(),
                normalization: r.config.normalization.as_str(),
                engine: "DE",
                signal: b.signal,
                noise: b.noise,
                variance: b.variance,
                noncoherent_interference: b.noncoherent_interference,
                pilot_contamination: b.pilot_contamination,
                sinr: b.sinr(),
                rate: b.rate(),
                trials: None,
                stderr_signal: None,
                stderr_variance: None,
                stderr_noncoherent_interference: None,
                stderr_pilot_contamination: None,
                stderr_sinr: None,
                stderr_rate: None,
            })?;
        }
    }
    w.flush().map_err(Error::Io)
}
