//! Expectation values, packet summaries, the wave-packet gate, weak
//! interference, Ehrenfest residuals and order parameters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inner_product, PhysicalParams, WaveFunction};
use crate::propagator::Potential;
use crate::spectral;

/// Imaginary residue above which an expectation value is rejected.
pub const HERMITIAN_RESIDUE_LIMIT: f64 = 1e-6;
/// Imaginary residue above which a warning is logged.
pub const HERMITIAN_RESIDUE_WARN: f64 = 1e-9;
/// Negative variance excursion above which the clamp is reported.
pub const VARIANCE_CLAMP_WARN: f64 = 1e-9;

const MAX_POLY_DEGREE: usize = 8;
const POSITIVITY_SAMPLES: usize = 65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// A(x) = Σ a_k x^k, coefficients in increasing power.
    PositionPoly { coefficients: Vec<f64> },
    Momentum,
    MomentumSquared,
}

impl ObservableSpec {
    pub fn position() -> Self {
        ObservableSpec::PositionPoly { coefficients: vec![0.0, 1.0] }
    }

    /// A(x) = x + offset.
    pub fn shifted_position(offset: f64) -> Self {
        ObservableSpec::PositionPoly { coefficients: vec![offset, 1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        if let ObservableSpec::PositionPoly { coefficients } = self {
            if coefficients.is_empty() {
                return Err(Error::InvalidObservable("empty polynomial".into()));
            }
            if coefficients.len() > MAX_POLY_DEGREE + 1 {
                return Err(Error::InvalidObservable(format!(
                    "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                    coefficients.len() - 1
                )));
            }
            if coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidObservable("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    /// Classical value A(x) for position polynomials.
    pub fn eval_position(&self, x: f64) -> Option<f64> {
        match self {
            ObservableSpec::PositionPoly { coefficients } => {
                Some(coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c))
            }
            _ => None,
        }
    }
}

fn position_expectation(psi: &WaveFunction, f: impl Fn(f64) -> f64) -> f64 {
    let dx = psi.grid().dx();
    psi.grid()
        .points()
        .zip(psi.amplitudes())
        .map(|(x, z)| f(x) * z.norm_sqr())
        .sum::<f64>()
        * dx
}

/// (ψ, p̂ⁿ ψ) through the spectral derivative, with the hermiticity check.
fn momentum_power_expectation(psi: &WaveFunction, power: i32, params: &PhysicalParams) -> Result<f64> {
    let hbar = params.hbar;
    let applied = spectral::apply_k_multiplier(psi.grid(), psi.amplitudes(), |k| {
        Complex64::new((hbar * k).powi(power), 0.0)
    });
    let phi = WaveFunction::from_raw(*psi.grid(), applied);
    let z = inner_product(psi, &phi)?;
    real_part_checked(z)
}

fn real_part_checked(z: Complex64) -> Result<f64> {
    let residue = z.im.abs();
    if residue > HERMITIAN_RESIDUE_LIMIT {
        return Err(Error::NonHermitianResidue { residue });
    }
    if residue > HERMITIAN_RESIDUE_WARN {
        log::warn!("expectation value carries imaginary residue {residue:e}");
    }
    Ok(z.re)
}

/// ⟨Â⟩ = (Ψ, ÂΨ).
pub fn expectation(psi: &WaveFunction, a: &ObservableSpec, params: &PhysicalParams) -> Result<f64> {
    a.validate()?;
    match a {
        ObservableSpec::PositionPoly { .. } => {
            Ok(position_expectation(psi, |x| a.eval_position(x).unwrap_or(0.0)))
        }
        ObservableSpec::Momentum => momentum_power_expectation(psi, 1, params),
        ObservableSpec::MomentumSquared => momentum_power_expectation(psi, 2, params),
    }
}

/// ⟨(Â − μ)²⟩, evaluated in centered form to avoid cancellation.
fn centered_second_moment(psi: &WaveFunction, a: &ObservableSpec, mu: f64, params: &PhysicalParams) -> Result<f64> {
    let hbar = params.hbar;
    let power = match a {
        ObservableSpec::PositionPoly { .. } => {
            return Ok(position_expectation(psi, |x| {
                let d = a.eval_position(x).unwrap_or(0.0) - mu;
                d * d
            }));
        }
        ObservableSpec::Momentum => 1,
        ObservableSpec::MomentumSquared => 2,
    };
    let applied = spectral::apply_k_multiplier(psi.grid(), psi.amplitudes(), |k| {
        let d = (hbar * k).powi(power) - mu;
        Complex64::new(d * d, 0.0)
    });
    let phi = WaveFunction::from_raw(*psi.grid(), applied);
    real_part_checked(inner_product(psi, &phi)?)
}

fn clamp_variance(var: f64) -> f64 {
    if var < 0.0 {
        if -var > VARIANCE_CLAMP_WARN {
            log::warn!("negative variance {var:e} clamped to zero");
        }
        0.0
    } else {
        var
    }
}

/// ΔÂ = (⟨Â²⟩ − ⟨Â⟩²)^½, clamped at zero.
///
/// Computed as ⟨(Â − ⟨Â⟩)²⟩ over a unit-norm state, which is the same quantity.
pub fn std_dev(psi: &WaveFunction, a: &ObservableSpec, params: &PhysicalParams) -> Result<f64> {
    let mean = expectation(psi, a, params)?;
    Ok(clamp_variance(centered_second_moment(psi, a, mean, params)?).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// Required dominance |⟨Â⟩| / ΔÂ.
    pub eta: f64,
    /// Support interval width multiplier: X = ⟨x⟩ ± kΔx/2.
    pub k: f64,
    /// Allowed relative error |⟨Â⟩ − A(⟨x⟩)| / |⟨Â⟩|.
    pub taylor_tol: f64,
    /// Probability mass the support must hold.
    pub mass_threshold: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { eta: 10.0, k: 1.0, taylor_tol: 0.05, mass_threshold: 0.99 }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0) {
            return Err(Error::InvalidGateConfig(format!("eta must be > 1, got {}", self.eta)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidGateConfig(format!("k must be > 0, got {}", self.k)));
        }
        if !(self.taylor_tol > 0.0 && self.taylor_tol < 1.0) {
            return Err(Error::InvalidGateConfig(format!(
                "taylor_tol must lie in (0, 1), got {}",
                self.taylor_tol
            )));
        }
        if !(self.mass_threshold > 0.5 && self.mass_threshold < 1.0) {
            return Err(Error::InvalidGateConfig(format!(
                "mass_threshold must lie in (0.5, 1), got {}",
                self.mass_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSummary {
    pub exp_x: f64,
    pub std_x: f64,
    pub exp_p: f64,
    pub std_p: f64,
    /// Open interval (⟨x⟩ − kΔx/2, ⟨x⟩ + kΔx/2).
    pub support: (f64, f64),
    pub mass_in_support: f64,
}

impl PacketSummary {
    /// Summary known only by position moments, e.g. for geometric tests.
    pub fn from_position(exp_x: f64, std_x: f64) -> Self {
        Self {
            exp_x,
            std_x,
            exp_p: 0.0,
            std_p: f64::NAN,
            support: (exp_x - 0.5 * std_x, exp_x + 0.5 * std_x),
            mass_in_support: f64::NAN,
        }
    }

    pub fn uncertainty_product(&self) -> f64 {
        self.std_x * self.std_p
    }
}

/// ∫_a^b |ψ|² dx over the piecewise-linear interpolant of the density.
pub fn mass_in_interval(psi: &WaveFunction, a: f64, b: f64) -> f64 {
    let grid = psi.grid();
    let dx = grid.dx();
    let rho = psi.density();
    let n = rho.len();
    let lo = a.max(grid.x_min());
    let hi = b.min(grid.x(n - 1));
    if hi <= lo {
        return 0.0;
    }
    let first = ((lo - grid.x_min()) / dx).floor() as usize;
    let last = (((hi - grid.x_min()) / dx).ceil() as usize).min(n - 1);
    let mut total = 0.0;
    for j in first..last {
        let (x0, x1) = (grid.x(j), grid.x(j + 1));
        let l = lo.max(x0);
        let r = hi.min(x1);
        if r <= l {
            continue;
        }
        let interp = |x: f64| rho[j] + (rho[j + 1] - rho[j]) * (x - x0) / dx;
        total += 0.5 * (r - l) * (interp(l) + interp(r));
    }
    total
}

pub fn packet_summary(psi: &WaveFunction, cfg: &GateConfig, params: &PhysicalParams) -> Result<PacketSummary> {
    let x = ObservableSpec::position();
    let exp_x = expectation(psi, &x, params)?;
    let std_x = std_dev(psi, &x, params)?;
    let exp_p = expectation(psi, &ObservableSpec::Momentum, params)?;
    let std_p = std_dev(psi, &ObservableSpec::Momentum, params)?;
    let half = 0.5 * cfg.k * std_x;
    let support = (exp_x - half, exp_x + half);
    let mass_in_support = mass_in_interval(psi, support.0, support.1).clamp(0.0, 1.0);
    Ok(PacketSummary { exp_x, std_x, exp_p, std_p, support, mass_in_support })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableVerdict {
    pub observable: ObservableSpec,
    pub expectation: f64,
    pub std_dev: f64,
    /// |⟨Â⟩| / ΔÂ.
    pub ratio: f64,
    /// |⟨Â⟩ − A(⟨x⟩)| / |⟨Â⟩|.
    pub taylor_error: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateVerdict {
    pub is_wave_packet: bool,
    pub per_observable: Vec<ObservableVerdict>,
    pub uncertainty_product: f64,
    pub mass_in_support: f64,
    pub summary: PacketSummary,
}

fn check_positive_on_support(a: &ObservableSpec, support: (f64, f64)) -> Result<()> {
    let (lo, hi) = support;
    let samples: Vec<(f64, f64)> = (0..POSITIVITY_SAMPLES)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (POSITIVITY_SAMPLES - 1) as f64;
            (x, a.eval_position(x).unwrap_or(0.0))
        })
        .collect();
    let scale = samples.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs())).max(f64::MIN_POSITIVE);
    match samples.iter().find(|(_, v)| !(*v > 1e-12 * scale)) {
        Some(&(x, value)) => Err(Error::ObservableNotPositiveOnSupport { x, value }),
        None => Ok(()),
    }
}

/// Wave-packet approximation test: dominance of every average over its
/// deviation, Taylor agreement ⟨Â⟩ ≈ A(⟨x⟩), and support mass.
pub fn wave_packet_gate(
    psi: &WaveFunction,
    observables: &[ObservableSpec],
    cfg: &GateConfig,
    params: &PhysicalParams,
) -> Result<GateVerdict> {
    cfg.validate()?;
    if observables.is_empty() {
        return Err(Error::InvalidObservable("gate needs at least one observable".into()));
    }
    let summary = packet_summary(psi, cfg, params)?;
    for a in observables {
        a.validate()?;
        if matches!(a, ObservableSpec::PositionPoly { .. }) {
            check_positive_on_support(a, summary.support)?;
        }
    }
    let mut per_observable = Vec::with_capacity(observables.len());
    for a in observables {
        let mean = expectation(psi, a, params)?;
        let sd = std_dev(psi, a, params)?;
        let classical = match a {
            ObservableSpec::PositionPoly { .. } => a.eval_position(summary.exp_x).unwrap_or(0.0),
            ObservableSpec::Momentum => summary.exp_p,
            ObservableSpec::MomentumSquared => summary.exp_p * summary.exp_p,
        };
        let ratio = if sd > 0.0 { mean.abs() / sd } else { f64::INFINITY };
        let diff = (mean - classical).abs();
        let taylor_error = if mean != 0.0 {
            diff / mean.abs()
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let passes = ratio >= cfg.eta && taylor_error <= cfg.taylor_tol;
        per_observable.push(ObservableVerdict {
            observable: a.clone(),
            expectation: mean,
            std_dev: sd,
            ratio,
            taylor_error,
            passes,
        });
    }
    let is_wave_packet =
        per_observable.iter().all(|v| v.passes) && summary.mass_in_support >= cfg.mass_threshold;
    Ok(GateVerdict {
        is_wave_packet,
        per_observable,
        uncertainty_product: summary.uncertainty_product(),
        mass_in_support: summary.mass_in_support,
        summary,
    })
}

/// Pairwise weak-interference classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakInterference {
    /// |⟨x⟩_n − ⟨x⟩_m| ≥ (Δ_n x + Δ_m x)/2; diagonal false.
    pub pairwise: Vec<Vec<bool>>,
    /// Mean width used by the common-width form |⟨x⟩_n − ⟨x⟩_m| ≥ Δx.
    pub common_width: f64,
    pub common_width_pairwise: Vec<Vec<bool>>,
    /// Whether every width lies within 10% of the common width.
    pub widths_comparable: bool,
}

impl WeakInterference {
    pub fn all_pairs(&self) -> bool {
        let n = self.pairwise.len();
        (0..n).all(|i| (0..n).all(|j| i == j || self.pairwise[i][j]))
    }

    pub fn first_failing_pair(&self) -> Option<(usize, usize)> {
        let n = self.pairwise.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).find(|&(i, j)| !self.pairwise[i][j])
    }
}

pub fn weakly_interfering(a: &PacketSummary, b: &PacketSummary) -> bool {
    (a.exp_x - b.exp_x).abs() >= 0.5 * (a.std_x + b.std_x)
}

pub fn weak_interference(summaries: &[PacketSummary]) -> Result<WeakInterference> {
    let n = summaries.len();
    if n < 2 {
        return Err(Error::TooFewPackets(n));
    }
    let common_width = summaries.iter().map(|s| s.std_x).sum::<f64>() / n as f64;
    let mut pairwise = vec![vec![false; n]; n];
    let mut common = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            pairwise[i][j] = weakly_interfering(&summaries[i], &summaries[j]);
            common[i][j] = (summaries[i].exp_x - summaries[j].exp_x).abs() >= common_width;
        }
    }
    let widths_comparable = summaries.iter().all(|s| (s.std_x - common_width).abs() <= 0.1 * common_width);
    Ok(WeakInterference { pairwise, common_width, common_width_pairwise: common, widths_comparable })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EhrenfestResiduals {
    /// Interior sample times where centered differences exist.
    pub times: Vec<f64>,
    /// |m d⟨x⟩/dt − ⟨p̂⟩|.
    pub residual_x: Vec<f64>,
    /// |d⟨p̂⟩/dt + ⟨∂V/∂x⟩|.
    pub residual_p: Vec<f64>,
    /// |d⟨p̂⟩/dt + ∂V(⟨x⟩)/∂⟨x⟩|, the Newtonian form.
    pub residual_newton: Vec<f64>,
}

impl EhrenfestResiduals {
    pub fn max_x(&self) -> f64 {
        self.residual_x.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_p(&self) -> f64 {
        self.residual_p.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_newton(&self) -> f64 {
        self.residual_newton.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn ehrenfest_residual(
    trajectory: &[(f64, WaveFunction)],
    v: &Potential,
    params: &PhysicalParams,
) -> Result<EhrenfestResiduals> {
    if trajectory.len() < 3 {
        return Err(Error::NonUniformSampling(format!("need >= 3 samples, got {}", trajectory.len())));
    }
    let h = trajectory[1].0 - trajectory[0].0;
    if !(h > 0.0) {
        return Err(Error::NonUniformSampling("times must increase".into()));
    }
    for w in trajectory.windows(2) {
        let d = w[1].0 - w[0].0;
        if (d - h).abs() > 1e-9 * h.abs() + 1e-12 {
            return Err(Error::NonUniformSampling(format!("spacing {d} differs from {h}")));
        }
    }
    let grid = *trajectory[0].1.grid();
    v.validate(&grid)?;
    let grad = v.gradient_values(&grid, params);
    let mut xs = Vec::with_capacity(trajectory.len());
    let mut ps = Vec::with_capacity(trajectory.len());
    let mut mean_force = Vec::with_capacity(trajectory.len());
    for (_, psi) in trajectory {
        if psi.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        xs.push(expectation(psi, &ObservableSpec::position(), params)?);
        ps.push(expectation(psi, &ObservableSpec::Momentum, params)?);
        let f = psi.density().iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>() * grid.dx();
        mean_force.push(f);
    }
    let mut out = EhrenfestResiduals {
        times: Vec::new(),
        residual_x: Vec::new(),
        residual_p: Vec::new(),
        residual_newton: Vec::new(),
    };
    for i in 1..trajectory.len() - 1 {
        let span = trajectory[i + 1].0 - trajectory[i - 1].0;
        let dxdt = (xs[i + 1] - xs[i - 1]) / span;
        let dpdt = (ps[i + 1] - ps[i - 1]) / span;
        out.times.push(trajectory[i].0);
        out.residual_x.push((params.mass * dxdt - ps[i]).abs());
        out.residual_p.push((dpdt + mean_force[i]).abs());
        out.residual_newton.push((dpdt + v.gradient_at(xs[i], &grid, params)).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    pub min_pairwise_separation: f64,
    pub critical_value: f64,
}

impl OrderParameters {
    pub fn transition(&self) -> bool {
        self.min_pairwise_separation >= self.critical_value
    }
}

/// Minimum pairwise center separation against the largest pairwise mean width.
pub fn order_parameters(branch_summaries: &[PacketSummary]) -> Result<OrderParameters> {
    let n = branch_summaries.len();
    if n < 2 {
        return Err(Error::TooFewPackets(n));
    }
    let mut min_sep = f64::INFINITY;
    let mut critical = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&branch_summaries[i], &branch_summaries[j]);
            min_sep = min_sep.min((a.exp_x - b.exp_x).abs());
            critical = critical.max(0.5 * (a.std_x + b.std_x));
        }
    }
    Ok(OrderParameters { min_pairwise_separation: min_sep, critical_value: critical })
}
