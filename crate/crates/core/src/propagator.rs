//! Strang-split spectral propagator for time-independent potentials.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::Fft;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, PhysicalParams, WaveFunction};
use crate::spectral;

/// Per-step norm drift beyond which a step is rejected.
pub const STEP_DRIFT_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Free,
    /// ½ m ω² (x − center)².
    Harmonic { omega: f64, center: f64 },
    /// barrier_height · ((x/a)² − 1)² with minima at ±a, a = well_separation / 2.
    DoubleWell { barrier_height: f64, well_separation: f64 },
    Tabulated { values: Vec<f64> },
}

impl Potential {
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        match self {
            Potential::Free => Ok(()),
            Potential::Harmonic { omega, center } => {
                if !(*omega > 0.0 && omega.is_finite()) || !center.is_finite() {
                    return Err(Error::InvalidPotential(format!("harmonic omega must be > 0, got {omega}")));
                }
                Ok(())
            }
            Potential::DoubleWell { barrier_height, well_separation } => {
                if !(*barrier_height > 0.0 && barrier_height.is_finite())
                    || !(*well_separation > 0.0 && well_separation.is_finite())
                {
                    return Err(Error::InvalidPotential(
                        "double well needs barrier_height > 0 and well_separation > 0".into(),
                    ));
                }
                Ok(())
            }
            Potential::Tabulated { values } => {
                if values.len() != grid.n_points() {
                    return Err(Error::InvalidPotential(format!(
                        "tabulated potential has {} values for {} grid points",
                        values.len(),
                        grid.n_points()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPotential("tabulated values must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value_at(&self, x: f64, params: &PhysicalParams) -> Option<f64> {
        match self {
            Potential::Free => Some(0.0),
            Potential::Harmonic { omega, center } => {
                Some(0.5 * params.mass * omega * omega * (x - center).powi(2))
            }
            Potential::DoubleWell { barrier_height, well_separation } => {
                let a = 0.5 * well_separation;
                let u = (x / a).powi(2) - 1.0;
                Some(barrier_height * u * u)
            }
            Potential::Tabulated { .. } => None,
        }
    }

    /// dV/dx at `x` for the analytic kinds.
    pub fn force_gradient_at(&self, x: f64, params: &PhysicalParams) -> Option<f64> {
        match self {
            Potential::Free => Some(0.0),
            Potential::Harmonic { omega, center } => Some(params.mass * omega * omega * (x - center)),
            Potential::DoubleWell { barrier_height, well_separation } => {
                let a = 0.5 * well_separation;
                Some(4.0 * barrier_height * ((x / a).powi(2) - 1.0) * x / (a * a))
            }
            Potential::Tabulated { .. } => None,
        }
    }

    pub fn values(&self, grid: &Grid1D, params: &PhysicalParams) -> Vec<f64> {
        match self {
            Potential::Tabulated { values } => values.clone(),
            _ => grid.points().map(|x| self.value_at(x, params).unwrap_or(0.0)).collect(),
        }
    }

    /// dV/dx on the grid; tabulated potentials are differentiated spectrally.
    pub fn gradient_values(&self, grid: &Grid1D, params: &PhysicalParams) -> Vec<f64> {
        match self {
            Potential::Tabulated { values } => spectral::spectral_derivative_real(grid, values),
            _ => grid.points().map(|x| self.force_gradient_at(x, params).unwrap_or(0.0)).collect(),
        }
    }

    /// dV/dx at an arbitrary point; tabulated kinds interpolate the spectral derivative.
    pub fn gradient_at(&self, x: f64, grid: &Grid1D, params: &PhysicalParams) -> f64 {
        if let Some(g) = self.force_gradient_at(x, params) {
            return g;
        }
        let grad = self.gradient_values(grid, params);
        let n = grid.n_points();
        let s = ((x - grid.x_min()) / grid.dx()).rem_euclid(n as f64);
        let j = s.floor() as usize % n;
        let frac = s - s.floor();
        grad[j] * (1.0 - frac) + grad[(j + 1) % n] * frac
    }

    /// Shortest classical oscillation period implied by the potential, if any.
    pub fn shortest_period(&self, params: &PhysicalParams) -> Option<f64> {
        match self {
            Potential::Harmonic { omega, .. } => Some(2.0 * PI / omega),
            Potential::DoubleWell { barrier_height, well_separation } => {
                let a = 0.5 * well_separation;
                let omega = (8.0 * barrier_height / (params.mass * a * a)).sqrt();
                Some(2.0 * PI / omega)
            }
            _ => None,
        }
    }

    pub fn check_time_step(&self, dt: f64, params: &PhysicalParams) -> Result<()> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidTimeStep(format!("dt must be finite and non-zero, got {dt}")));
        }
        if let Some(period) = self.shortest_period(params) {
            if dt.abs() > 0.1 * period {
                return Err(Error::InvalidTimeStep(format!(
                    "|dt| = {} exceeds 0.1 x period {period}",
                    dt.abs()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
}

impl EvolutionConfig {
    pub fn validate(&self, v: &Potential, params: &PhysicalParams) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidTimeStep(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidTimeStep("record_every must be >= 1".into()));
        }
        v.check_time_step(self.dt, params)
    }
}

/// Precomputed phases for repeated steps of one (grid, potential, dt).
///
/// A non-zero drift velocity `u` adds the generator `u·p̂` to the kinetic
/// factor, translating the state rigidly at speed `u` without extra spreading.
pub struct Propagator {
    grid: Grid1D,
    dt: f64,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Propagator {
    pub fn new(grid: &Grid1D, v: &Potential, params: &PhysicalParams, dt: f64) -> Result<Self> {
        Self::with_drift(grid, v, params, dt, 0.0)
    }

    pub fn with_drift(
        grid: &Grid1D,
        v: &Potential,
        params: &PhysicalParams,
        dt: f64,
        drift_velocity: f64,
    ) -> Result<Self> {
        params.validate()?;
        v.validate(grid)?;
        v.check_time_step(dt, params)?;
        let hbar = params.hbar;
        let half_potential = v
            .values(grid, params)
            .into_iter()
            .map(|val| Complex64::from_polar(1.0, -val * dt / (2.0 * hbar)))
            .collect();
        let kinetic = spectral::wavenumbers(grid)
            .into_iter()
            .map(|k| {
                let omega = hbar * k * k / (2.0 * params.mass) + drift_velocity * k;
                Complex64::from_polar(1.0, -omega * dt)
            })
            .collect();
        let n = grid.n_points();
        Ok(Self {
            grid: *grid,
            dt,
            half_potential,
            kinetic,
            fft: spectral::forward_plan(n),
            ifft: spectral::inverse_plan(n),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// exp(−iV dt/2ħ) F⁻¹ exp(−iT dt/ħ) F exp(−iV dt/2ħ) ψ.
    pub fn step(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let before = psi.norm_sqr();
        let mut buf: Vec<Complex64> =
            psi.amplitudes().iter().zip(&self.half_potential).map(|(z, h)| z * h).collect();
        self.fft.process(&mut buf);
        for (z, k) in buf.iter_mut().zip(&self.kinetic) {
            *z *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        for (z, h) in buf.iter_mut().zip(&self.half_potential) {
            *z *= h * scale;
        }
        let out = WaveFunction::from_raw(self.grid, buf);
        let drift = (out.norm_sqr() - before).abs();
        if !(drift <= STEP_DRIFT_LIMIT) {
            return Err(Error::UnstableStep { drift });
        }
        Ok(out)
    }
}

/// One Strang step.
pub fn step(psi: &WaveFunction, v: &Potential, params: &PhysicalParams, dt: f64) -> Result<WaveFunction> {
    Propagator::new(psi.grid(), v, params, dt)?.step(psi)
}

/// Applies `cfg.n_steps` steps. The observer sees the initial state and every
/// `record_every`-th state after it.
pub fn evolve<F>(
    psi: &WaveFunction,
    v: &Potential,
    params: &PhysicalParams,
    cfg: &EvolutionConfig,
    mut observer: F,
) -> Result<WaveFunction>
where
    F: FnMut(f64, &WaveFunction),
{
    cfg.validate(v, params)?;
    observer(0.0, psi);
    if cfg.n_steps == 0 {
        return Ok(psi.clone());
    }
    let prop = Propagator::new(psi.grid(), v, params, cfg.dt)?;
    let mut cur = psi.clone();
    for i in 1..=cfg.n_steps {
        cur = prop.step(&cur)?;
        if i % cfg.record_every == 0 {
            observer(i as f64 * cfg.dt, &cur);
        }
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, make_gaussian};

    fn mean_x(psi: &WaveFunction) -> f64 {
        psi.grid().points().zip(psi.density()).map(|(x, d)| x * d).sum::<f64>() * psi.grid().dx()
    }

    fn std_x(psi: &WaveFunction) -> f64 {
        let m = mean_x(psi);
        let m2 = psi.grid().points().zip(psi.density()).map(|(x, d)| x * x * d).sum::<f64>()
            * psi.grid().dx();
        (m2 - m * m).sqrt()
    }

    #[test]
    fn free_step_keeps_symmetric_packet_centered() {
        let g = Grid1D::new(-40.0, 40.0, 1024).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0, &p).unwrap();
        let out = step(&psi, &Potential::Free, &p, 0.01).unwrap();
        assert!(mean_x(&out).abs() < 1e-10);
    }

    #[test]
    fn coherent_state_reaches_turning_point() {
        // <x>(t) = 3 cos t
        let g = Grid1D::new(-20.0, 20.0, 1024).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, 3.0, std::f64::consts::FRAC_1_SQRT_2, 0.0, &p).unwrap();
        let v = Potential::Harmonic { omega: 1.0, center: 0.0 };
        let n = 1000;
        let cfg = EvolutionConfig { dt: PI / n as f64, n_steps: n, record_every: n };
        let out = evolve(&psi, &v, &p, &cfg, |_, _| {}).unwrap();
        assert!((mean_x(&out) + 3.0).abs() < 1e-6, "got {}", mean_x(&out));
    }

    #[test]
    fn free_spreading_law() {
        // Δx(t)² = σ₀²(1 + (ħt/2mσ₀²)²) → √2 at t = 2
        let g = Grid1D::new(-40.0, 40.0, 1024).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0, &p).unwrap();
        let cfg = EvolutionConfig { dt: 0.01, n_steps: 200, record_every: 200 };
        let out = evolve(&psi, &Potential::Free, &p, &cfg, |_, _| {}).unwrap();
        assert!((std_x(&out) - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn zero_steps_is_identity() {
        let g = Grid1D::new(-40.0, 40.0, 256).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, 0.0, 2.0, 0.0, &p).unwrap();
        let cfg = EvolutionConfig { dt: 0.01, n_steps: 0, record_every: 1 };
        let mut seen = 0;
        let out = evolve(&psi, &Potential::Free, &p, &cfg, |_, _| seen += 1).unwrap();
        assert_eq!(out, psi);
        assert_eq!(seen, 1);
    }

    #[test]
    fn free_norm_drift_over_1000_steps() {
        let g = Grid1D::new(-40.0, 40.0, 1024).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, -5.0, 1.0, 1.0, &p).unwrap();
        let cfg = EvolutionConfig { dt: 0.005, n_steps: 1000, record_every: 1 };
        let mut worst: f64 = 0.0;
        evolve(&psi, &Potential::Free, &p, &cfg, |_, s| worst = worst.max((s.norm_sqr() - 1.0).abs()))
            .unwrap();
        assert!(worst <= 1e-10, "drift {worst:e}");
    }

    #[test]
    fn step_bound_enforced_for_harmonic() {
        let g = Grid1D::new(-20.0, 20.0, 256).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0, &p).unwrap();
        let v = Potential::Harmonic { omega: 10.0, center: 0.0 };
        assert!(matches!(step(&psi, &v, &p, 0.1), Err(Error::InvalidTimeStep(_))));
        assert!(step(&psi, &v, &p, 0.05).is_ok());
        let bad = Potential::Harmonic { omega: -1.0, center: 0.0 };
        assert!(matches!(step(&psi, &bad, &p, 0.01), Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn tabulated_matches_analytic_harmonic() {
        let g = Grid1D::new(-20.0, 20.0, 512).unwrap();
        let p = PhysicalParams::default();
        let psi = make_gaussian(&g, 2.0, 1.0, 0.0, &p).unwrap();
        let v = Potential::Harmonic { omega: 0.5, center: 0.0 };
        let tab = Potential::Tabulated { values: v.values(&g, &p) };
        let a = step(&psi, &v, &p, 0.02).unwrap();
        let b = step(&psi, &tab, &p, 0.02).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drift_translates_rigidly() {
        let g = Grid1D::new(-20.0, 20.0, 512).unwrap();
        let p = PhysicalParams { mass: 1e6, hbar: 1.0 };
        let psi = make_gaussian(&g, 0.0, 1.0, 0.0, &p).unwrap();
        let prop = Propagator::with_drift(&g, &Potential::Free, &p, 0.01, 2.0).unwrap();
        let mut cur = psi.clone();
        for _ in 0..100 {
            cur = prop.step(&cur).unwrap();
        }
        assert!((mean_x(&cur) - 2.0).abs() < 1e-9);
        assert!((std_x(&cur) - 1.0).abs() < 1e-6);
        assert!((inner_product(&cur, &cur).unwrap().re - 1.0).abs() < 1e-12);
    }
}
