//! Experiment runner: binds a scenario sweep to the engines and writes
//! long-format CSV files that join on `(point, drop, scheme, normalization,
//! cell, ue)`.
//!
//! Every scenario is rescaled so the receiver noise power is one before any
//! engine runs. SINRs and rates are unaffected; powers in the CSV files are
//! therefore relative to `σ²`, and a user-supplied RZF `α` is read in the
//! same units.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::compute_statistics;
use crate::closed_form::{mrt_closed_form, pcinr_value, zf_closed_form, PcinrRegion, UncorrelatedInputs};
use crate::det_equiv::{de_sinr_many, DeOptions};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{estimate_sinr_many, McOptions};
use crate::precoder::{Normalization, PrecoderConfig, Regularizer, RzfParams, Scheme};
use crate::scenario::{CorrelationKind, Scenario, ScenarioConfig};
use crate::sinr::SinrBreakdown;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Engine {
    #[serde(rename = "MC")]
    MonteCarlo,
    #[serde(rename = "DE")]
    DetEquiv,
    ClosedForm,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::MonteCarlo, Engine::DetEquiv, Engine::ClosedForm];

    pub fn as_str(self) -> &'static str {
        match self {
            Engine::MonteCarlo => "MC",
            Engine::DetEquiv => "DE",
            Engine::ClosedForm => "ClosedForm",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("engine", format!("unknown engine `{s}` (expected MC, DE or ClosedForm)")))
    }
}

/// Sweep axis. With `ratios` set, `N = ratio · K` for every `K` in `users`;
/// otherwise every `N` in `antennas` is paired with every `K` in `users`.
/// An empty `users` list means the scenario's own `K`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub antennas: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ratios: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    #[serde(rename = "N")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
}

impl Sweep {
    pub fn points(&self, base: &ScenarioConfig) -> Vec<SweepPoint> {
        let users = if self.users.is_empty() { vec![base.users] } else { self.users.clone() };
        let mut out = Vec::new();
        for &k in &users {
            if self.ratios.is_empty() {
                for &n in &self.antennas {
                    out.push((n, k));
                }
            } else {
                for &r in &self.ratios {
                    out.push((r * k, k));
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(index, (antennas, users))| SweepPoint { index, antennas, users })
            .collect()
    }
}

fn default_drops() -> usize {
    1
}

fn default_trials() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: ScenarioConfig,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub normalizations: Vec<Normalization>,
    pub engines: Vec<Engine>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// UE drops per sweep point; drop `i` uses scenario seed `seed + i`.
    #[serde(default = "default_drops")]
    pub drops: usize,
    /// Seeds the UE drops and the Monte Carlo channel draws.
    pub seed: u64,
    /// RZF regularization in `σ² = 1` units; defaults to `K/(Nρ_dl)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rzf_alpha: Option<f64>,
    /// Scalar RZF leverage `Z = zI`.
    #[serde(default)]
    pub rzf_z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn configs(&self, scenario: &Scenario) -> Result<Vec<PrecoderConfig>> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for &norm in &self.normalizations {
                out.push(match scheme {
                    Scheme::Rzf => {
                        let mut p = RzfParams::default_for(scenario);
                        if let Some(a) = self.rzf_alpha {
                            p = RzfParams::new(a, Regularizer::Zero)?;
                        }
                        if self.rzf_z != 0.0 {
                            p.z = Regularizer::ScaledIdentity(self.rzf_z);
                        }
                        PrecoderConfig::rzf(norm, p)
                    }
                    _ => PrecoderConfig::for_scenario(scheme, norm, scenario),
                });
            }
        }
        Ok(out)
    }
}

fn base_spec(name: &str, scenario: ScenarioConfig, sweep: Sweep) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        scenario,
        sweep,
        schemes: Scheme::ALL.to_vec(),
        normalizations: Normalization::ALL.to_vec(),
        engines: vec![Engine::DetEquiv, Engine::MonteCarlo],
        trials: 500,
        drops: 1,
        seed: 1,
        rzf_alpha: None,
        rzf_z: 0.0,
        output: None,
    }
}

/// Center-cell sum rate against `N` with the steering-vector model.
fn sum_rate_sweep(name: &str, users: usize) -> ExperimentSpec {
    base_spec(
        name,
        ScenarioConfig::reference(40, users, CorrelationKind::SteeringVector),
        Sweep {
            antennas: vec![40, 60, 80, 100, 120],
            ..Default::default()
        },
    )
}

/// The built-in experiments, by name.
pub fn builtin(name: &str) -> Option<ExperimentSpec> {
    Some(match name {
        "fig1" => sum_rate_sweep("fig1", 8),
        "fig2" => sum_rate_sweep("fig2", 16),
        "table1" => ExperimentSpec {
            schemes: vec![Scheme::Zf],
            engines: vec![Engine::DetEquiv, Engine::MonteCarlo, Engine::ClosedForm],
            ..base_spec(
                "table1",
                ScenarioConfig::reference(40, 8, CorrelationKind::Uncorrelated),
                Sweep {
                    antennas: vec![40, 80],
                    ..Default::default()
                },
            )
        },
        "fig3" => ExperimentSpec {
            engines: vec![Engine::DetEquiv],
            ..base_spec(
                "fig3",
                ScenarioConfig::reference(20, 10, CorrelationKind::Uncorrelated),
                Sweep {
                    ratios: vec![2, 3, 4, 5, 6, 8, 10, 12, 14, 16, 18, 20],
                    users: vec![5, 10, 15],
                    ..Default::default()
                },
            )
        },
        _ => return None,
    })
}

pub const BUILTIN_NAMES: [&str; 4] = ["fig1", "fig2", "table1", "fig3"];

/// Name and one-line description of every built-in experiment.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    vec![
        ("fig1", "center-cell sum rate vs N, K = 8, steering-vector correlation, DE and MC"),
        ("fig2", "center-cell sum rate vs N, K = 16, steering-vector correlation, DE and MC"),
        ("table1", "per-UE ZF SINR, N in {40, 80}, K = 8, uncorrelated, DE, MC and closed form"),
        ("fig3", "PCINR vs N/K in [2, 20], K in {5, 10, 15}, uncorrelated, DE"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    /// Violated assumption or offending field.
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

/// Problems that would make `run_experiment` fail or skip rows. Nothing is
/// computed beyond the UE drops.
pub fn validate(spec: &ExperimentSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if spec.engines.is_empty() {
        out.push(Diagnostic::new("engines", "at least one engine is required"));
    }
    if spec.schemes.is_empty() || spec.normalizations.is_empty() {
        out.push(Diagnostic::new("schemes", "at least one scheme and one normalization are required"));
    }
    let sweep = &spec.sweep;
    if sweep.antennas.is_empty() == sweep.ratios.is_empty() {
        out.push(Diagnostic::new("sweep", "set exactly one of `antennas` or `ratios`"));
    }
    if sweep.users.contains(&0) || spec.scenario.users == 0 {
        out.push(Diagnostic::new("sweep", "K must be at least 1"));
    }
    if spec.drops == 0 {
        out.push(Diagnostic::new("drops", "at least one UE drop is required"));
    }
    if spec.engines.contains(&Engine::MonteCarlo) && spec.trials < 2 {
        out.push(Diagnostic::new("trials", "Monte Carlo needs at least 2 trials"));
    }
    if let Err(e) = spec.scenario.power() {
        out.push(Diagnostic::new("scenario", e.to_string()));
    }
    if spec.scenario.cells == 0 {
        out.push(Diagnostic::new("scenario", "L must be at least 1"));
    }
    if spec.schemes.contains(&Scheme::Rzf) {
        if let Some(a) = spec.rzf_alpha {
            if let Err(e) = RzfParams::new(a, Regularizer::Zero) {
                out.push(Diagnostic::new("α_j > 0", e.to_string()));
            }
        }
        if !(spec.rzf_z.is_finite() && spec.rzf_z >= 0.0) {
            out.push(Diagnostic::new("rzf_z", "Z must be positive semidefinite"));
        }
    }
    for p in sweep.points(&spec.scenario) {
        if p.antennas == 0 {
            out.push(Diagnostic::new("sweep", format!("point {}: N must be at least 1", p.index)));
        } else if spec.schemes.contains(&Scheme::Zf) && p.antennas <= p.users {
            out.push(Diagnostic::new(
                "A2/A4",
                format!("point {}: ZF needs N > K, got N = {}, K = {}", p.index, p.antennas, p.users),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
}

#[derive(Debug, Serialize)]
struct UeRow<'a> {
    point: usize,
    drop: usize,
    #[serde(rename = "N")]
    antennas: usize,
    #[serde(rename = "K")]
    users: usize,
    engine: &'a str,
    scheme: &'a str,
    normalization: &'a str,
    cell: usize,
    ue: usize,
    signal: f64,
    noise: f64,
    variance: f64,
    noncoherent_interference: f64,
    pilot_contamination: f64,
    sinr: f64,
    rate: f64,
    stderr_sinr: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CellRow<'a> {
    point: usize,
    drop: usize,
    #[serde(rename = "N")]
    antennas: usize,
    #[serde(rename = "K")]
    users: usize,
    engine: &'a str,
    scheme: &'a str,
    normalization: &'a str,
    cell: usize,
    sum_rate: f64,
    /// Monte Carlo `E[tr G Gᴴ]`.
    power: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PcinrRow<'a> {
    #[serde(rename = "N/K")]
    ratio: f64,
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "N")]
    antennas: usize,
    drop: usize,
    engine: &'a str,
    scheme: &'a str,
    normalization: &'a str,
    pcinr: f64,
    region: u8,
}

#[derive(Debug, Serialize)]
struct ComparisonRow<'a> {
    point: usize,
    drop: usize,
    #[serde(rename = "N")]
    antennas: usize,
    #[serde(rename = "K")]
    users: usize,
    scheme: &'a str,
    normalization: &'a str,
    metric: &'a str,
    cell: usize,
    ue: Option<usize>,
    de: f64,
    mc: f64,
    error_pct: f64,
}

#[derive(Debug, Serialize)]
struct ErrorRow<'a> {
    point: usize,
    drop: usize,
    #[serde(rename = "N")]
    antennas: usize,
    #[serde(rename = "K")]
    users: usize,
    engine: &'a str,
    scheme: &'a str,
    normalization: &'a str,
    error: String,
}

/// Results of one engine for one configuration at one point and drop.
#[derive(Debug, Clone)]
struct Outcome {
    engine: Engine,
    config: PrecoderConfig,
    result: std::result::Result<EngineResult, String>,
}

#[derive(Debug, Clone)]
struct EngineResult {
    ues: Vec<SinrBreakdown>,
    stderr_sinr: Option<Vec<f64>>,
    cell_power: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Task {
    point: SweepPoint,
    drop: usize,
}

#[derive(Debug, Clone)]
struct TaskResult {
    task: Task,
    cells: usize,
    outcomes: Vec<Outcome>,
}

fn failed(engine: Engine, configs: &[PrecoderConfig], e: &Error) -> Vec<Outcome> {
    configs
        .iter()
        .map(|c| Outcome {
            engine,
            config: c.clone(),
            result: Err(e.to_string()),
        })
        .collect()
}

fn run_engine(engine: Engine, spec: &ExperimentSpec, s: &Scenario, configs: &[PrecoderConfig], mc_seed: u64) -> Vec<Outcome> {
    match engine {
        Engine::MonteCarlo => {
            // Configurations that fail validation are reported alone so the
            // others still share one set of channel draws.
            let (ok, bad): (Vec<_>, Vec<_>) = configs
                .iter()
                .cloned()
                .partition(|c| c.validate(s.antennas(), s.users()).is_ok());
            let mut out: Vec<Outcome> = bad
                .iter()
                .map(|c| Outcome {
                    engine,
                    result: Err(c.validate(s.antennas(), s.users()).unwrap_err().to_string()),
                    config: c.clone(),
                })
                .collect();
            match estimate_sinr_many(s, &ok, &McOptions::new(spec.trials, mc_seed)) {
                Ok(est) => out.extend(est.into_iter().map(|e| Outcome {
                    engine,
                    config: e.config.clone(),
                    result: Ok(EngineResult {
                        ues: e.ues.iter().map(|u| u.breakdown).collect(),
                        stderr_sinr: Some(e.ues.iter().map(|u| u.stderr.sinr).collect()),
                        cell_power: Some(e.cell_power.clone()),
                    }),
                })),
                Err(e) => out.extend(failed(engine, &ok, &e)),
            }
            out
        }
        Engine::DetEquiv => {
            let stats = match compute_statistics(s) {
                Ok(st) => st,
                Err(e) => return failed(engine, configs, &e),
            };
            configs
                .iter()
                .map(|c| Outcome {
                    engine,
                    config: c.clone(),
                    result: de_sinr_many(s, &stats, std::slice::from_ref(c), &DeOptions::default())
                        .map(|mut r| EngineResult {
                            ues: r.remove(0).ues,
                            stderr_sinr: None,
                            cell_power: None,
                        })
                        .map_err(|e| e.to_string()),
                })
                .collect()
        }
        Engine::ClosedForm => {
            let inputs = UncorrelatedInputs::from_scenario(s);
            configs
                .iter()
                .map(|c| {
                    let result = inputs.as_ref().map_err(|e| e.to_string()).and_then(|inp| {
                        match c.scheme() {
                            Scheme::Zf => zf_closed_form(inp, c.normalization).map_err(|e| e.to_string()),
                            Scheme::Mrt => Ok(mrt_closed_form(inp, c.normalization)),
                            Scheme::Rzf => Err(Error::Inapplicable {
                                engine: "ClosedForm".into(),
                                reason: "no closed form for RZF".into(),
                            }
                            .to_string()),
                        }
                        .map(|ues| EngineResult {
                            ues,
                            stderr_sinr: None,
                            cell_power: None,
                        })
                    });
                    Outcome {
                        engine,
                        config: c.clone(),
                        result,
                    }
                })
                .collect()
        }
    }
}

fn run_task(spec: &ExperimentSpec, task: Task) -> Result<TaskResult> {
    let mut cfg = spec.scenario.clone();
    cfg.antennas = task.point.antennas;
    cfg.users = task.point.users;
    cfg.seed = spec.seed.wrapping_add(task.drop as u64);
    let s = cfg.build()?;
    let s = s.rescaled(1.0 / s.power().sigma2)?;
    let configs = spec.configs(&s)?;
    let mc_seed = spec
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((task.point.index as u64) << 20 | task.drop as u64);
    let mut engines = spec.engines.clone();
    engines.sort();
    engines.dedup();
    let outcomes = engines
        .iter()
        .flat_map(|&e| run_engine(e, spec, &s, &configs, mc_seed))
        .collect();
    Ok(TaskResult {
        cells: s.cells(),
        task,
        outcomes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub output: PathBuf,
    pub points: usize,
    pub ue_rows: usize,
    pub errors: usize,
    /// Largest per-UE `|DE − MC|/MC` SINR error, in percent.
    pub max_sinr_error_pct: Option<f64>,
    /// Largest per-cell `|DE − MC|/MC` sum-rate error, in percent.
    pub max_sum_rate_error_pct: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    seed: u64,
    spec: &'a ExperimentSpec,
    points: Vec<SweepPoint>,
    files: [&'a str; 6],
}

const FILES: [&str; 6] = ["ue.csv", "cell.csv", "pcinr.csv", "comparison.csv", "errors.csv", "manifest.json"];

fn pct(de: f64, mc: f64) -> f64 {
    100.0 * (de - mc).abs() / mc.abs()
}

/// Runs every sweep point, drop, engine and configuration and writes the
/// result files into `out`.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, options: RunOptions) -> Result<ExperimentSummary> {
    let diagnostics = validate(spec);
    if let Some(d) = diagnostics.first() {
        return Err(Error::Config(format!("{}: {}", d.subject, d.message)));
    }
    let points = spec.sweep.points(&spec.scenario);
    let tasks: Vec<Task> = points
        .iter()
        .flat_map(|&point| (0..spec.drops).map(move |drop| Task { point, drop }))
        .collect();
    let compute = || tasks.par_iter().map(|t| run_task(spec, t.clone())).collect::<Result<Vec<_>>>();
    let results = match options.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| invalid("threads", e.to_string()))?
            .install(compute)?,
        None => compute()?,
    };

    fs::create_dir_all(out)?;
    let writer = |name: &str| -> Result<csv::Writer<fs::File>> { Ok(csv::Writer::from_path(out.join(name))?) };
    let (mut ue_w, mut cell_w, mut pcinr_w, mut cmp_w, mut err_w) = (
        writer("ue.csv")?,
        writer("cell.csv")?,
        writer("pcinr.csv")?,
        writer("comparison.csv")?,
        writer("errors.csv")?,
    );
    let mut summary = ExperimentSummary {
        name: spec.name.clone(),
        output: out.to_path_buf(),
        points: points.len(),
        ue_rows: 0,
        errors: 0,
        max_sinr_error_pct: None,
        max_sum_rate_error_pct: None,
    };
    let bump = |slot: &mut Option<f64>, v: f64| *slot = Some(slot.map_or(v, |m: f64| m.max(v)));

    for r in &results {
        let (p, drop) = (r.task.point, r.task.drop);
        let users = p.users;
        for o in &r.outcomes {
            let (engine, scheme, norm) = (o.engine.as_str(), o.config.scheme().as_str(), o.config.normalization.as_str());
            let res = match &o.result {
                Ok(res) => res,
                Err(e) => {
                    summary.errors += 1;
                    err_w.serialize(ErrorRow {
                        point: p.index,
                        drop,
                        antennas: p.antennas,
                        users,
                        engine,
                        scheme,
                        normalization: norm,
                        error: e.clone(),
                    })?;
                    continue;
                }
            };
            for (idx, b) in res.ues.iter().enumerate() {
                ue_w.serialize(UeRow {
                    point: p.index,
                    drop,
                    antennas: p.antennas,
                    users,
                    engine,
                    scheme,
                    normalization: norm,
                    cell: idx / users,
                    ue: idx % users,
                    signal: b.signal,
                    noise: b.noise,
                    variance: b.variance,
                    noncoherent_interference: b.noncoherent_interference,
                    pilot_contamination: b.pilot_contamination,
                    sinr: b.sinr(),
                    rate: b.rate(),
                    stderr_sinr: res.stderr_sinr.as_ref().map(|s| s[idx]),
                })?;
                summary.ue_rows += 1;
            }
            for cell in 0..r.cells {
                cell_w.serialize(CellRow {
                    point: p.index,
                    drop,
                    antennas: p.antennas,
                    users,
                    engine,
                    scheme,
                    normalization: norm,
                    cell,
                    sum_rate: crate::sinr::sum_rate(&res.ues[cell * users..(cell + 1) * users]),
                    power: res.cell_power.as_ref().map(|c| c[cell]),
                })?;
            }
            let values: Vec<f64> = res.ues.iter().map(pcinr_value).collect::<Result<_>>()?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            pcinr_w.serialize(PcinrRow {
                ratio: p.antennas as f64 / users as f64,
                users,
                antennas: p.antennas,
                drop,
                engine,
                scheme,
                normalization: norm,
                pcinr: mean,
                region: PcinrRegion::classify(mean).number(),
            })?;
        }

        // DE against MC wherever both succeeded.
        let find = |engine: Engine, c: &PrecoderConfig| {
            r.outcomes
                .iter()
                .find(|o| o.engine == engine && o.config == *c)
                .and_then(|o| o.result.as_ref().ok())
        };
        for o in r.outcomes.iter().filter(|o| o.engine == Engine::DetEquiv) {
            let (Some(de), Some(mc)) = (find(Engine::DetEquiv, &o.config), find(Engine::MonteCarlo, &o.config)) else {
                continue;
            };
            let (scheme, norm) = (o.config.scheme().as_str(), o.config.normalization.as_str());
            for cell in 0..r.cells {
                let range = cell * users..(cell + 1) * users;
                let (a, b) = (
                    crate::sinr::sum_rate(&de.ues[range.clone()]),
                    crate::sinr::sum_rate(&mc.ues[range.clone()]),
                );
                bump(&mut summary.max_sum_rate_error_pct, pct(a, b));
                cmp_w.serialize(ComparisonRow {
                    point: p.index,
                    drop,
                    antennas: p.antennas,
                    users,
                    scheme,
                    normalization: norm,
                    metric: "sum_rate",
                    cell,
                    ue: None,
                    de: a,
                    mc: b,
                    error_pct: pct(a, b),
                })?;
                for idx in range {
                    let (a, b) = (de.ues[idx].sinr(), mc.ues[idx].sinr());
                    bump(&mut summary.max_sinr_error_pct, pct(a, b));
                    cmp_w.serialize(ComparisonRow {
                        point: p.index,
                        drop,
                        antennas: p.antennas,
                        users,
                        scheme,
                        normalization: norm,
                        metric: "sinr",
                        cell,
                        ue: Some(idx % users),
                        de: a,
                        mc: b,
                        error_pct: pct(a, b),
                    })?;
                }
            }
        }
    }
    for w in [&mut ue_w, &mut cell_w, &mut pcinr_w, &mut cmp_w, &mut err_w] {
        w.flush()?;
    }

    let manifest = Manifest {
        name: &spec.name,
        version: env!("CARGO_PKG_VERSION"),
        seed: spec.seed,
        spec,
        points,
        files: FILES,
    };
    let mut f = fs::File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(engines: Vec<Engine>) -> ExperimentSpec {
        let mut scenario = ScenarioConfig::reference(12, 3, CorrelationKind::Uncorrelated);
        scenario.cells = 2;
        ExperimentSpec {
            trials: 20,
            engines,
            ..base_spec("small", scenario, Sweep { antennas: vec![8, 12], ..Default::default() })
        }
    }

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let spec = builtin(name).unwrap();
            assert_eq!(validate(&spec), vec![], "{name}");
        }
        assert!(builtin("nope").is_none());
        assert_eq!(list_experiments().len(), BUILTIN_NAMES.len());
    }

    #[test]
    fn square_zf_is_reported() {
        let mut spec = small(vec![Engine::DetEquiv]);
        spec.scenario.users = 8;
        spec.sweep.antennas = vec![8];
        let d = validate(&spec);
        assert!(d.iter().any(|d| d.subject == "A2/A4"), "{d:?}");
    }

    #[test]
    fn zero_alpha_is_rejected() {
        let mut spec = small(vec![Engine::DetEquiv]);
        spec.rzf_alpha = Some(0.0);
        let d = validate(&spec);
        assert!(d.iter().any(|d| d.subject == "α_j > 0" && d.message.contains("α_j > 0")), "{d:?}");
    }

    #[test]
    fn empty_engines_and_sweep_are_reported() {
        let mut spec = small(vec![]);
        spec.sweep = Sweep::default();
        let d = validate(&spec);
        assert!(d.iter().any(|d| d.subject == "engines"));
        assert!(d.iter().any(|d| d.subject == "sweep"));
    }

    #[test]
    fn ratio_sweep_points() {
        let sweep = Sweep {
            ratios: vec![2, 5],
            users: vec![3, 4],
            ..Default::default()
        };
        let p: Vec<_> = sweep
            .points(&ScenarioConfig::reference(1, 1, CorrelationKind::Uncorrelated))
            .iter()
            .map(|p| (p.antennas, p.users))
            .collect();
        assert_eq!(p, vec![(6, 3), (15, 3), (8, 4), (20, 4)]);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        for name in BUILTIN_NAMES {
            let spec = builtin(name).unwrap();
            assert_eq!(ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap(), spec);
        }
        assert!(ExperimentSpec::from_toml("name = 3").is_err());
    }

    #[test]
    fn engine_names_parse() {
        assert_eq!("mc".parse::<Engine>().unwrap(), Engine::MonteCarlo);
        assert_eq!("ClosedForm".parse::<Engine>().unwrap(), Engine::ClosedForm);
        assert!("xx".parse::<Engine>().is_err());
    }

    #[test]
    fn reruns_are_byte_identical_and_inapplicable_rows_are_logged() {
        let mut spec = small(Engine::ALL.to_vec());
        spec.scenario.correlation = CorrelationKind::SteeringVector;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sa = run_experiment(&spec, a.path(), RunOptions { threads: Some(1) }).unwrap();
        run_experiment(&spec, b.path(), RunOptions { threads: Some(3) }).unwrap();
        for f in FILES {
            let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
            assert_eq!(x, y, "{f}");
        }
        // Six closed-form rows per point fail on the correlated model.
        assert_eq!(sa.errors, 12);
        let errors = fs::read_to_string(a.path().join("errors.csv")).unwrap();
        assert!(errors.lines().skip(1).all(|l| l.contains("ClosedForm")));
        // Two engines × six configurations × two points × six UEs.
        assert_eq!(sa.ue_rows, 144);
        let cmp = fs::read_to_string(a.path().join("comparison.csv")).unwrap();
        assert!(cmp.starts_with("point,drop,N,K,scheme,normalization,metric,cell,ue,de,mc,error_pct"));
        assert!(sa.max_sinr_error_pct.is_some());
    }

    #[test]
    fn closed_form_agrees_with_de_rows() {
        let spec = ExperimentSpec {
            schemes: vec![Scheme::Zf, Scheme::Mrt],
            ..small(vec![Engine::DetEquiv, Engine::ClosedForm])
        };
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&spec, dir.path(), RunOptions::default()).unwrap();
        assert_eq!(s.errors, 0);
        let mut rdr = csv::Reader::from_path(dir.path().join("ue.csv")).unwrap();
        let mut sinr = std::collections::BTreeMap::new();
        for r in rdr.records() {
            let r = r.unwrap();
            let key = (r[0].to_string(), r[5].to_string(), r[6].to_string(), r[7].to_string(), r[8].to_string());
            sinr.entry(key).or_insert_with(Vec::new).push(r[15].parse::<f64>().unwrap());
        }
        assert_eq!(sinr.len(), 2 * 4 * 6);
        for v in sinr.values() {
            assert!(v.len() == 2 && (v[0] / v[1] - 1.0).abs() < 1e-9, "{v:?}");
        }
    }
}
