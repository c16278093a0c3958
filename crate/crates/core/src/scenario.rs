//! Network geometry, large-scale fading and per-link spatial correlation.
//!
//! All gains are linear. Decibel quantities only appear in [`ScenarioConfig`]
//! and are converted when a [`Scenario`] is built.
//!
//! Index convention used throughout the crate: `(l, j, k)` is the link from
//! the BS of cell `l` to UE `k` of cell `j`. UE `k` of every cell uses pilot
//! `k`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, cplx, CMat};
use crate::rng::{self, Domain};

pub type Point = [f64; 2];

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Training/downlink SNR factors and noise power, all linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub rho_tr: f64,
    pub rho_dl: f64,
    pub sigma2: f64,
}

impl PowerConfig {
    pub fn new(rho_tr: f64, rho_dl: f64, sigma2: f64) -> Result<Self> {
        for (name, v) in [("rho_tr", rho_tr), ("rho_dl", rho_dl), ("sigma2", sigma2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self {
            rho_tr,
            rho_dl,
            sigma2,
        })
    }

    /// Noise power in watts from a spectral density in dBm/Hz over `bandwidth_hz`.
    pub fn from_db(
        rho_tr_db: f64,
        rho_dl_db: f64,
        bandwidth_hz: f64,
        noise_dbm_per_hz: f64,
    ) -> Result<Self> {
        if !(bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth_Hz", "must be > 0"));
        }
        let noise_dbm = noise_dbm_per_hz + 10.0 * bandwidth_hz.log10();
        Self::new(
            db_to_linear(rho_tr_db),
            db_to_linear(rho_dl_db),
            db_to_linear(noise_dbm - 30.0),
        )
    }

    /// σ²/ρ_tr, the effective noise on the despread pilot observation.
    pub fn training_noise(&self) -> f64 {
        self.sigma2 / self.rho_tr
    }

    /// σ²/ρ_dl, the downlink receiver noise.
    pub fn downlink_noise(&self) -> f64 {
        self.sigma2 / self.rho_dl
    }
}

/// Inputs to [`drop_ues`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub num_cells: usize,
    pub cell_radius: f64,
    pub exclusion_radius: f64,
    pub pathloss_exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub num_cells: usize,
    pub cell_radius: f64,
    pub exclusion_radius: f64,
    pub pathloss_exponent: f64,
    pub bs_positions: Vec<Point>,
    /// `ue_positions[j][k]`.
    pub ue_positions: Vec<Vec<Point>>,
}

impl Geometry {
    pub fn users_per_cell(&self) -> usize {
        self.ue_positions.first().map_or(0, Vec::len)
    }

    /// Distance from the BS of cell `l` to UE `k` of cell `j`.
    pub fn distance(&self, l: usize, j: usize, k: usize) -> f64 {
        distance(self.bs_positions[l], self.ue_positions[j][k])
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cells == 0 || self.bs_positions.len() != self.num_cells {
            return Err(invalid("num_cells", "need one BS per cell and at least one cell"));
        }
        if self.ue_positions.len() != self.num_cells {
            return Err(invalid("ue_positions", "need one UE list per cell"));
        }
        let k = self.users_per_cell();
        if k == 0 {
            return Err(invalid("K", "need at least one UE per cell"));
        }
        for (j, ues) in self.ue_positions.iter().enumerate() {
            if ues.len() != k {
                return Err(invalid("ue_positions", "every cell must hold K UEs"));
            }
            for &p in ues {
                let r = distance(p, self.bs_positions[j]);
                if r > self.cell_radius * (1.0 + 1e-12) || r < self.exclusion_radius {
                    return Err(invalid(
                        "ue_positions",
                        format!("UE at distance {r} from BS {j} is outside its cell annulus"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Cell centres on a hexagonal grid: the centre cell first, then rings
/// outward. Neighbouring centres are `2·radius·cos 30°` apart.
pub fn hexagonal_layout(num_cells: usize, cell_radius: f64) -> Vec<Point> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let spacing = 2.0 * cell_radius * (PI / 6.0).cos();
    let to_xy = |q: i64, r: i64| -> Point {
        [
            spacing * (q as f64 + r as f64 / 2.0),
            spacing * (3f64.sqrt() / 2.0) * r as f64,
        ]
    };
    let mut out = Vec::with_capacity(num_cells);
    if num_cells == 0 {
        return out;
    }
    out.push([0.0, 0.0]);
    let mut ring = 1i64;
    while out.len() < num_cells {
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                if out.len() == num_cells {
                    return out;
                }
                out.push(to_xy(q, r));
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    out
}

/// Drop `k` UEs uniformly in each cell's disc, outside the exclusion disc.
///
/// Each cell draws from its own stream, so the UEs of cell `j` do not depend
/// on how many cells are simulated.
pub fn drop_ues(params: &GeometryParams, k: usize, seed: u64) -> Result<Geometry> {
    if k == 0 {
        return Err(invalid("K", "need at least one UE per cell"));
    }
    if params.num_cells == 0 {
        return Err(invalid("L", "need at least one cell"));
    }
    let (radius, excl) = (params.cell_radius, params.exclusion_radius);
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("cell_radius", "must be finite and > 0"));
    }
    if !(excl >= 0.0 && excl < radius) {
        return Err(invalid(
            "exclusion_radius",
            format!("must satisfy 0 <= exclusion ({excl}) < radius ({radius})"),
        ));
    }
    if !(params.pathloss_exponent.is_finite() && params.pathloss_exponent > 0.0) {
        return Err(invalid("beta", "path-loss exponent must be > 0"));
    }

    let bs_positions = hexagonal_layout(params.num_cells, radius);
    let ue_positions = bs_positions
        .iter()
        .enumerate()
        .map(|(j, &centre)| {
            let mut rng = rng::stream(seed, Domain::UeDrop, j as u64);
            (0..k)
                .map(|_| loop {
                    let x = rng.random_range(-radius..=radius);
                    let y = rng.random_range(-radius..=radius);
                    let r = x.hypot(y);
                    if r <= radius && r >= excl && r > 0.0 {
                        break [centre[0] + x, centre[1] + y];
                    }
                })
                .collect()
        })
        .collect();

    Ok(Geometry {
        num_cells: params.num_cells,
        cell_radius: radius,
        exclusion_radius: excl,
        pathloss_exponent: params.pathloss_exponent,
        bs_positions,
        ue_positions,
    })
}

/// `distance^(−β)`.
pub fn pathloss(distance: f64, beta: f64) -> Option<f64> {
    (distance > 0.0).then(|| distance.powf(-beta))
}

/// Large-scale gains `d[l][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    cells: usize,
    users: usize,
    gains: Vec<f64>,
}

impl LargeScale {
    pub fn from_fn(cells: usize, users: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut gains = Vec::with_capacity(cells * cells * users);
        for l in 0..cells {
            for j in 0..cells {
                for k in 0..users {
                    gains.push(f(l, j, k));
                }
            }
        }
        Self {
            cells,
            users,
            gains,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn get(&self, l: usize, j: usize, k: usize) -> f64 {
        self.gains[(l * self.cells + j) * self.users + k]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.gains.iter().copied()
    }

    /// Σ_j d[l][j][k]: total gain into BS `l` on pilot `k`.
    pub fn pilot_sum(&self, l: usize, k: usize) -> f64 {
        (0..self.cells).map(|j| self.get(l, j, k)).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            gains: self.gains.iter().map(|g| g * c).collect(),
            ..self.clone()
        }
    }
}

pub fn build_large_scale(geometry: &Geometry) -> Result<LargeScale> {
    let (cells, users) = (geometry.num_cells, geometry.users_per_cell());
    let mut gains = Vec::with_capacity(cells * cells * users);
    for l in 0..cells {
        for j in 0..cells {
            for k in 0..users {
                let g = pathloss(geometry.distance(l, j, k), geometry.pathloss_exponent)
                    .ok_or(Error::ZeroDistance { bs: l, cell: j, ue: k })?;
                gains.push(g);
            }
        }
    }
    Ok(LargeScale {
        cells,
        users,
        gains,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CorrelationModel {
    Uncorrelated,
    SteeringVector { antenna_spacing: f64 },
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrelationModel::Uncorrelated => Ok(()),
            CorrelationModel::SteeringVector { antenna_spacing } => {
                if antenna_spacing.is_finite() && antenna_spacing > 0.0 {
                    Ok(())
                } else {
                    Err(invalid("omega", "antenna spacing must be > 0"))
                }
            }
        }
    }
}

/// `A = [a(θ_1), …, a(θ_N)]` with `θ_i = −π/2 + (i−1)π/N` and unit-norm
/// uniform-linear-array steering vectors.
pub fn steering_matrix(n: usize, spacing: f64) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |row, col| {
        let theta = -PI / 2.0 + col as f64 * PI / n as f64;
        let phase = -2.0 * PI * spacing * row as f64 * theta.sin();
        cplx(phase.cos() * scale, phase.sin() * scale)
    })
}

/// Spatial part shared by every link: `Θ_ljk = d_ljk · R`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialShape {
    /// `R = I`.
    Identity,
    /// `R = A Aᴴ`, with `A` kept as the square-root factor.
    Steering { factor: CMat, gram: CMat },
}

impl SpatialShape {
    fn build(n: usize, model: CorrelationModel) -> Self {
        match model {
            CorrelationModel::Uncorrelated => SpatialShape::Identity,
            CorrelationModel::SteeringVector { antenna_spacing } => {
                let factor = steering_matrix(n, antenna_spacing);
                let gram = linalg::hermitize(&linalg::matmul(&factor, &factor.adjoint()));
                SpatialShape::Steering { factor, gram }
            }
        }
    }

    pub fn gram(&self, n: usize) -> CMat {
        match self {
            SpatialShape::Identity => linalg::identity(n),
            SpatialShape::Steering { gram, .. } => gram.clone(),
        }
    }
}

/// Immutable description of one network realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    antennas: usize,
    users: usize,
    cells: usize,
    geometry: Option<Geometry>,
    power: PowerConfig,
    correlation: CorrelationModel,
    gains: LargeScale,
    shape: SpatialShape,
}

impl Scenario {
    /// Scenario from a UE drop; gains follow the geometry's path-loss law.
    pub fn new(
        antennas: usize,
        geometry: Geometry,
        power: PowerConfig,
        correlation: CorrelationModel,
    ) -> Result<Self> {
        geometry.validate()?;
        let gains = build_large_scale(&geometry)?;
        let mut s = Self::from_gains(antennas, gains, power, correlation)?;
        s.geometry = Some(geometry);
        Ok(s)
    }

    /// Scenario from explicit gains, without geometry.
    pub fn from_gains(
        antennas: usize,
        gains: LargeScale,
        power: PowerConfig,
        correlation: CorrelationModel,
    ) -> Result<Self> {
        PowerConfig::new(power.rho_tr, power.rho_dl, power.sigma2)?;
        correlation.validate()?;
        let (cells, users) = (gains.cells(), gains.users());
        if cells == 0 || users == 0 {
            return Err(invalid("K", "need at least one cell and one UE per cell"));
        }
        if antennas <= users {
            return Err(Error::AssumptionViolated {
                assumption: "N > K",
                detail: format!("N = {antennas} antennas for K = {users} UEs"),
            });
        }
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(invalid("d", format!("large-scale gains must be > 0, found {g}")));
        }
        Ok(Self {
            antennas,
            users,
            cells,
            geometry: None,
            power,
            correlation,
            shape: SpatialShape::build(antennas, correlation),
            gains,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    pub fn power(&self) -> &PowerConfig {
        &self.power
    }

    pub fn correlation(&self) -> CorrelationModel {
        self.correlation
    }

    pub fn gains(&self) -> &LargeScale {
        &self.gains
    }

    pub fn shape(&self) -> &SpatialShape {
        &self.shape
    }

    /// Same network with every gain and the noise power multiplied by `c`.
    /// SINRs are invariant; absolute regularizers are not.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("scale", "must be > 0"));
        }
        let power = PowerConfig {
            sigma2: self.power.sigma2 * c,
            ..self.power
        };
        let mut s = Self::from_gains(self.antennas, self.gains.scaled(c), power, self.correlation)?;
        s.geometry = self.geometry.clone();
        Ok(s)
    }

    /// Same network with a different antenna count.
    pub fn with_antennas(&self, antennas: usize) -> Result<Self> {
        let mut s = Self::from_gains(antennas, self.gains.clone(), self.power, self.correlation)?;
        s.geometry = self.geometry.clone();
        Ok(s)
    }
}

/// View of the per-link correlation matrices `Θ_ljk = d_ljk R`.
#[derive(Debug, Clone, Copy)]
pub struct ThetaSet<'a> {
    n: usize,
    gains: &'a LargeScale,
    shape: &'a SpatialShape,
}

impl ThetaSet<'_> {
    pub fn matrix(&self, l: usize, j: usize, k: usize) -> CMat {
        let d = self.gains.get(l, j, k);
        match self.shape {
            SpatialShape::Identity => linalg::scaled_identity(self.n, d),
            SpatialShape::Steering { gram, .. } => gram * cplx(d, 0.0),
        }
    }

    /// A factor `S` with `S Sᴴ = Θ_ljk`.
    pub fn sqrt_factor(&self, l: usize, j: usize, k: usize) -> CMat {
        let s = self.gains.get(l, j, k).sqrt();
        match self.shape {
            SpatialShape::Identity => linalg::scaled_identity(self.n, s),
            SpatialShape::Steering { factor, .. } => factor * cplx(s, 0.0),
        }
    }
}

pub fn build_theta(scenario: &Scenario) -> ThetaSet<'_> {
    ThetaSet {
        n: scenario.antennas,
        gains: &scenario.gains,
        shape: &scenario.shape,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    Uncorrelated,
    SteeringVector,
}

/// Structured-text scenario description. Round-trips through TOML exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "N")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub cells: usize,
    pub cell_radius: f64,
    pub exclusion_radius: f64,
    #[serde(rename = "beta")]
    pub pathloss_exponent: f64,
    #[serde(rename = "rho_tr_dB")]
    pub rho_tr_db: f64,
    #[serde(rename = "rho_dl_dB")]
    pub rho_dl_db: f64,
    #[serde(rename = "bandwidth_Hz")]
    pub bandwidth_hz: f64,
    #[serde(rename = "noise_dBm_per_Hz")]
    pub noise_dbm_per_hz: f64,
    pub correlation: CorrelationKind,
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub seed: u64,
}

fn default_omega() -> f64 {
    0.3
}

impl ScenarioConfig {
    /// Seven-cell layout with the reference radio parameters.
    pub fn reference(antennas: usize, users: usize, correlation: CorrelationKind) -> Self {
        Self {
            antennas,
            users,
            cells: 7,
            cell_radius: 1000.0,
            exclusion_radius: 100.0,
            pathloss_exponent: 3.7,
            rho_tr_db: 6.0,
            rho_dl_db: 10.0,
            bandwidth_hz: 20e6,
            noise_dbm_per_hz: -174.0,
            correlation,
            omega: 0.3,
            seed: 1,
        }
    }

    pub fn geometry_params(&self) -> GeometryParams {
        GeometryParams {
            num_cells: self.cells,
            cell_radius: self.cell_radius,
            exclusion_radius: self.exclusion_radius,
            pathloss_exponent: self.pathloss_exponent,
        }
    }

    pub fn power(&self) -> Result<PowerConfig> {
        PowerConfig::from_db(
            self.rho_tr_db,
            self.rho_dl_db,
            self.bandwidth_hz,
            self.noise_dbm_per_hz,
        )
    }

    pub fn correlation_model(&self) -> CorrelationModel {
        match self.correlation {
            CorrelationKind::Uncorrelated => CorrelationModel::Uncorrelated,
            CorrelationKind::SteeringVector => CorrelationModel::SteeringVector {
                antenna_spacing: self.omega,
            },
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let geometry = drop_ues(&self.geometry_params(), self.users, self.seed)?;
        Scenario::new(self.antennas, geometry, self.power()?, self.correlation_model())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(excl: f64) -> GeometryParams {
        GeometryParams {
            num_cells: 7,
            cell_radius: 1000.0,
            exclusion_radius: excl,
            pathloss_exponent: 3.7,
        }
    }

    #[test]
    fn drop_respects_annulus() {
        let g = drop_ues(&params(100.0), 8, 1).unwrap();
        assert_eq!(g.ue_positions.len(), 7);
        for j in 0..7 {
            assert_eq!(g.ue_positions[j].len(), 8);
            for k in 0..8 {
                let r = g.distance(j, j, k);
                assert!((100.0..=1000.0).contains(&r), "r = {r}");
            }
        }
        g.validate().unwrap();
    }

    #[test]
    fn single_ue_without_exclusion() {
        let p = GeometryParams {
            num_cells: 1,
            cell_radius: 250.0,
            exclusion_radius: 0.0,
            pathloss_exponent: 2.0,
        };
        let g = drop_ues(&p, 1, 9).unwrap();
        assert!(g.distance(0, 0, 0) <= 250.0);
    }

    #[test]
    fn drop_rejects_bad_inputs() {
        assert!(drop_ues(&params(100.0), 0, 1).is_err());
        assert!(drop_ues(&params(1000.0), 4, 1).is_err());
        assert!(drop_ues(&params(-1.0), 4, 1).is_err());
    }

    #[test]
    fn mean_distance_matches_annulus_expectation() {
        // E[r] for r uniform over an annulus: (2/3)(R³ − r0³)/(R² − r0²).
        let (big, small) = (1000.0f64, 100.0f64);
        let expected = 2.0 / 3.0 * (big.powi(3) - small.powi(3)) / (big.powi(2) - small.powi(2));
        let p = GeometryParams {
            num_cells: 1,
            ..params(small)
        };
        let g = drop_ues(&p, 100_000, 5).unwrap();
        let mean = (0..100_000).map(|k| g.distance(0, 0, k)).sum::<f64>() / 1e5;
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn hexagonal_ring_spacing() {
        let pos = hexagonal_layout(7, 1000.0);
        let spacing = 2.0 * 1000.0 * (PI / 6.0).cos();
        for p in &pos[1..] {
            assert!((p[0].hypot(p[1]) - spacing).abs() < 1e-9);
        }
        // The six neighbours are mutually distinct and adjacent ones touch.
        for a in 1..7 {
            let b = if a == 6 { 1 } else { a + 1 };
            assert!((distance(pos[a], pos[b]) - spacing).abs() < 1e-9);
        }
        assert_eq!(hexagonal_layout(19, 1.0).len(), 19);
    }

    #[test]
    fn pathloss_law() {
        let d = pathloss(100.0, 3.7).unwrap();
        assert!((d / 100f64.powf(-3.7) - 1.0).abs() < 1e-15);
        assert!((d - 4.0e-8).abs() < 0.1e-8);
        assert_eq!(pathloss(1.0, 2.9), Some(1.0));
        let ratio = pathloss(50.0, 3.7).unwrap() / pathloss(100.0, 3.7).unwrap();
        assert!((ratio - 2f64.powf(3.7)).abs() < 1e-9);
        assert!((ratio - 13.0).abs() < 0.01);
        assert_eq!(pathloss(0.0, 3.7), None);
    }

    #[test]
    fn zero_distance_is_rejected() {
        let g = Geometry {
            num_cells: 1,
            cell_radius: 10.0,
            exclusion_radius: 0.0,
            pathloss_exponent: 3.0,
            bs_positions: vec![[0.0, 0.0]],
            ue_positions: vec![vec![[0.0, 0.0]]],
        };
        assert!(matches!(build_large_scale(&g), Err(Error::ZeroDistance { .. })));
    }

    #[test]
    fn noise_power_from_db() {
        let p = PowerConfig::from_db(6.0, 10.0, 20e6, -174.0).unwrap();
        // −174 dBm/Hz + 73.01 dB = −100.99 dBm.
        assert!((10.0 * p.sigma2.log10() + 30.0 + 100.99).abs() < 0.01);
        assert!((p.rho_dl - 10.0).abs() < 1e-12);
        assert!((p.rho_tr - 3.981).abs() < 1e-3);
        assert!(PowerConfig::new(0.0, 1.0, 1.0).is_err());
    }

    fn tiny_scenario(model: CorrelationModel, n: usize) -> Scenario {
        let gains = LargeScale::from_fn(2, 2, |l, j, k| 1.0 + l as f64 + 0.5 * j as f64 + 0.25 * k as f64);
        Scenario::from_gains(n, gains, PowerConfig::new(1.0, 1.0, 1.0).unwrap(), model).unwrap()
    }

    #[test]
    fn uncorrelated_theta_is_scaled_identity() {
        let gains = LargeScale::from_fn(1, 1, |_, _, _| 2.0);
        let s = Scenario::from_gains(4, gains, PowerConfig::new(1.0, 1.0, 1.0).unwrap(), CorrelationModel::Uncorrelated)
            .unwrap();
        assert_eq!(build_theta(&s).matrix(0, 0, 0), linalg::scaled_identity(4, 2.0));
    }

    #[test]
    fn steering_columns_have_unit_norm() {
        let a = steering_matrix(16, 0.3);
        for c in a.column_iter() {
            assert!((c.norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_theta_trace_and_psd() {
        let n = 8;
        let s = tiny_scenario(CorrelationModel::SteeringVector { antenna_spacing: 0.3 }, n);
        let theta = build_theta(&s);
        // Direct construction of Θ = d·A·Aᴴ element by element.
        let a = steering_matrix(n, 0.3);
        let d = s.gains().get(1, 0, 1);
        let mut direct = CMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                for i in 0..n {
                    direct[(r, c)] += a[(r, i)] * a[(c, i)].conj() * d;
                }
            }
        }
        let m = theta.matrix(1, 0, 1);
        assert!(linalg::relative_frobenius_error(&m, &direct) < 1e-12);
        let tr_aa = (0..n).map(|i| a.column(i).norm_squared()).sum::<f64>();
        assert!((m.trace().re / n as f64 - d * tr_aa / n as f64).abs() < 1e-12 * d);
        let eig = linalg::hermitian_eigenvalues(&m);
        assert!(eig[0] >= -1e-10 * eig[n - 1]);
        let f = theta.sqrt_factor(1, 0, 1);
        assert!(linalg::relative_frobenius_error(&(&f * f.adjoint()), &m) < 1e-8);
    }

    #[test]
    fn scenario_requires_more_antennas_than_users() {
        let gains = LargeScale::from_fn(1, 4, |_, _, _| 1.0);
        let p = PowerConfig::new(1.0, 1.0, 1.0).unwrap();
        assert!(Scenario::from_gains(4, gains.clone(), p, CorrelationModel::Uncorrelated).is_err());
        assert!(Scenario::from_gains(5, gains, p, CorrelationModel::Uncorrelated).is_ok());
    }

    #[test]
    fn seeded_build_is_deterministic() {
        let cfg = ScenarioConfig::reference(16, 4, CorrelationKind::Uncorrelated);
        assert_eq!(cfg.build().unwrap(), cfg.build().unwrap());
        let other = ScenarioConfig { seed: 2, ..cfg.clone() };
        assert_ne!(cfg.build().unwrap().gains(), other.build().unwrap().gains());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn config_round_trips_bit_exactly(
            n in 2usize..64, k in 1usize..4, l in 1usize..8,
            radius in 10.0f64..5000.0, excl_frac in 0.0f64..0.9,
            beta in 2.0f64..5.0, tr in -10.0f64..20.0, dl in -10.0f64..20.0,
            steering in any::<bool>(), omega in 0.05f64..1.0, seed in 0u64..(1u64 << 62),
        ) {
            let cfg = ScenarioConfig {
                antennas: n + k, users: k, cells: l,
                cell_radius: radius, exclusion_radius: radius * excl_frac,
                pathloss_exponent: beta, rho_tr_db: tr, rho_dl_db: dl,
                bandwidth_hz: 20e6, noise_dbm_per_hz: -174.0,
                correlation: if steering { CorrelationKind::SteeringVector } else { CorrelationKind::Uncorrelated },
                omega, seed,
            };
            let text = cfg.to_toml().unwrap();
            let back = ScenarioConfig::from_toml(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            let (a, b) = (cfg.build().unwrap(), back.build().unwrap());
            prop_assert!(a.gains().iter().zip(b.gains().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
