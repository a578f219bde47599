//! Strict TOML scenario configuration.
//!
//! ```toml
//! scenario = "measurement_run"
//! seed = 7
//! coefficients = [0.6, 0.8]          # or [[re, im], ...]
//!
//! [grid]
//! x_min = -20.0
//! x_max = 40.0
//! n_points = 1024
//!
//! [physics]
//! mass = 100.0
//!
//! [coupling]
//! shift_velocity = 1.0
//! d_sep = 10.0
//! tau = 12.0
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::GateConfig;
use crate::error::{Error, Result};
use crate::grid::{make_gaussian, Grid1D, PhysicalParams, WaveFunction};
use crate::measurement::CouplingConfig;
use crate::propagator::{EvolutionConfig, Potential};

pub const COEFFICIENT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FreeSpread,
    HarmonicCoherent,
    CatGate,
    CollapseSample,
    MeasurementRun,
    BornEnsemble,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FreeSpread => "free_spread",
            ScenarioKind::HarmonicCoherent => "harmonic_coherent",
            ScenarioKind::CatGate => "cat_gate",
            ScenarioKind::CollapseSample => "collapse_sample",
            ScenarioKind::MeasurementRun => "measurement_run",
            ScenarioKind::BornEnsemble => "born_ensemble",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, ScenarioKind::CollapseSample | ScenarioKind::MeasurementRun | ScenarioKind::BornEnsemble)
    }

    fn uses_coefficients(self) -> bool {
        matches!(
            self,
            ScenarioKind::CatGate | ScenarioKind::CollapseSample | ScenarioKind::MeasurementRun | ScenarioKind::BornEnsemble
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_min: -40.0, x_max: 40.0, n_points: 1024 }
    }
}

/// Initial packet; `separation` spaces the branch packets of cat scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSpec {
    pub center: f64,
    pub sigma: f64,
    pub momentum: f64,
    pub separation: Option<f64>,
}

impl Default for PacketSpec {
    fn default() -> Self {
        Self { center: 0.0, sigma: 1.0, momentum: 0.0, separation: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_runs: Option<u64>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self { n_runs: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum CoefficientValue {
    Real(f64),
    Complex([f64; 2]),
}

impl From<CoefficientValue> for Complex64 {
    fn from(v: CoefficientValue) -> Self {
        match v {
            CoefficientValue::Real(re) => Complex64::new(re, 0.0),
            CoefficientValue::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioKind,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    physics: PhysicalParams,
    #[serde(default)]
    gate: GateSpec,
    coupling: Option<CouplingConfig>,
    evolution: Option<EvolutionConfig>,
    #[serde(default)]
    packet: PacketSpec,
    #[serde(default)]
    potential: Potential,
    coefficients: Option<Vec<CoefficientValue>>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    ensemble: EnsembleSpec,
}

/// Gate table as written; k defaults per scenario.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateSpec {
    eta: Option<f64>,
    k: Option<f64>,
    taylor_tol: Option<f64>,
    mass_threshold: Option<f64>,
}

/// Support multiplier for scenarios that rely on the mass threshold: ±3σ of a
/// Gaussian holds 0.997 of the probability.
pub const PACKET_SUPPORT_K: f64 = 6.0;

impl GateSpec {
    fn resolve(&self, scenario: ScenarioKind) -> GateConfig {
        let d = GateConfig::default();
        let k_default = if scenario.uses_coefficients() { PACKET_SUPPORT_K } else { d.k };
        GateConfig {
            eta: self.eta.unwrap_or(d.eta),
            k: self.k.unwrap_or(k_default),
            taylor_tol: self.taylor_tol.unwrap_or(d.taylor_tol),
            mass_threshold: self.mass_threshold.unwrap_or(d.mass_threshold),
        }
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_runs: Option<u64>,
}

/// A fully validated configuration with defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub grid: GridSpec,
    pub physics: PhysicalParams,
    pub gate: GateConfig,
    pub coupling: Option<CouplingConfig>,
    pub evolution: EvolutionConfig,
    pub packet: PacketSpec,
    pub potential: Potential,
    pub coefficients: Vec<Complex64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub ensemble: EnsembleSpec,
}

pub const DEFAULT_BORN_RUNS: u64 = 100_000;

impl ScenarioConfig {
    pub fn grid(&self) -> Grid1D {
        Grid1D::new(self.grid.x_min, self.grid.x_max, self.grid.n_points).expect("validated grid")
    }

    /// Packet spacing for cat-style scenarios; 20σ keeps branch overlaps far below 1e-6.
    pub fn separation(&self) -> f64 {
        self.packet.separation.unwrap_or(20.0 * self.packet.sigma)
    }

    pub fn initial_packet(&self) -> Result<WaveFunction> {
        make_gaussian(&self.grid(), self.packet.center, self.packet.sigma, self.packet.momentum, &self.physics)
    }

    /// One packet per coefficient at center + n·separation.
    pub fn branch_packets(&self) -> Result<Vec<WaveFunction>> {
        let grid = self.grid();
        (0..self.coefficients.len())
            .map(|n| {
                make_gaussian(
                    &grid,
                    self.packet.center + n as f64 * self.separation(),
                    self.packet.sigma,
                    self.packet.momentum,
                    &self.physics,
                )
            })
            .collect()
    }

    pub fn coupling(&self) -> CouplingConfig {
        self.coupling.unwrap_or(CouplingConfig { shift_velocity: 1.0, d_sep: 10.0, tau: 12.0 })
    }

    /// Ensemble size when running in ensemble mode.
    pub fn n_runs(&self) -> Option<u64> {
        match self.scenario {
            ScenarioKind::BornEnsemble => Some(self.ensemble.n_runs.unwrap_or(DEFAULT_BORN_RUNS)),
            _ => self.ensemble.n_runs,
        }
    }
}

fn invalid(e: Error) -> Error {
    match e {
        Error::Validation(_) | Error::Parse(_) => e,
        other => Error::Validation(other.to_string()),
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_config_with(text, Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: Overrides) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let evolution = raw.evolution.unwrap_or(match raw.scenario {
        ScenarioKind::HarmonicCoherent => EvolutionConfig { dt: 1e-3, n_steps: 6283, record_every: 10 },
        _ => EvolutionConfig { dt: 0.01, n_steps: 200, record_every: 1 },
    });
    let coefficients: Vec<Complex64> = match raw.coefficients {
        Some(list) => list.into_iter().map(Complex64::from).collect(),
        None => vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)],
    };
    let mut ensemble = raw.ensemble;
    if overrides.n_runs.is_some() {
        ensemble.n_runs = overrides.n_runs;
    }
    let cfg = ScenarioConfig {
        scenario: raw.scenario,
        grid: raw.grid,
        physics: raw.physics,
        gate: raw.gate.resolve(raw.scenario),
        coupling: raw.coupling,
        evolution,
        packet: raw.packet,
        potential: raw.potential,
        coefficients,
        seed: overrides.seed.or(raw.seed),
        output_dir: raw.output_dir,
        ensemble,
    };
    validate(&cfg).map_err(invalid)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig) -> Result<()> {
    let grid = Grid1D::new(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_points)?;
    cfg.physics.validate()?;
    cfg.gate.validate()?;
    cfg.potential.validate(&grid)?;
    cfg.evolution.validate(&cfg.potential, &cfg.physics)?;

    match cfg.scenario {
        ScenarioKind::FreeSpread if cfg.potential != Potential::Free => {
            return Err(Error::Validation("free_spread requires the free potential".into()));
        }
        ScenarioKind::HarmonicCoherent if !matches!(cfg.potential, Potential::Harmonic { .. }) => {
            return Err(Error::Validation("harmonic_coherent requires a harmonic potential".into()));
        }
        _ => {}
    }

    if cfg.scenario.uses_coefficients() {
        if cfg.coefficients.is_empty() {
            return Err(Error::Validation("coefficients must not be empty".into()));
        }
        let sum: f64 = cfg.coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (sum - 1.0).abs() > COEFFICIENT_NORM_TOL {
            return Err(Error::Validation(format!("coefficients are not normalized: sum |c_n|^2 = {sum}")));
        }
    }
    if cfg.scenario.is_stochastic() && cfg.seed.is_none() {
        return Err(Error::Validation(format!("scenario {} needs a seed", cfg.scenario.name())));
    }
    if cfg.ensemble.n_runs == Some(0) {
        return Err(Error::Validation("ensemble.n_runs must be >= 1".into()));
    }

    match cfg.scenario {
        ScenarioKind::MeasurementRun => {
            cfg.coupling().validate(cfg.packet.sigma)?;
            let apparatus = cfg.initial_packet()?;
            // every pointer must stay on the grid for the whole coupling
            let reach = cfg.coupling().tau * cfg.coupling().shift_velocity * (cfg.coefficients.len() - 1) as f64;
            if cfg.packet.center + reach > grid.x_max() - 5.0 * cfg.packet.sigma {
                return Err(Error::Validation(format!(
                    "pointer branches travel to {} which leaves the grid",
                    cfg.packet.center + reach
                )));
            }
            drop(apparatus);
        }
        ScenarioKind::CatGate | ScenarioKind::CollapseSample | ScenarioKind::BornEnsemble => {
            cfg.branch_packets()?;
        }
        ScenarioKind::FreeSpread | ScenarioKind::HarmonicCoherent => {
            cfg.initial_packet()?;
        }
    }
    Ok(())
}
