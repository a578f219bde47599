//! Uniform periodic 1-D grid, complex wave functions on it, and the canonical
//! state constructors (Gaussian packets and superpositions).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the unit-norm invariant after normalization.
pub const NORM_TOL: f64 = 1e-10;

/// Largest probability mass allowed in the outer 5% of the grid on either side.
pub const TAIL_MASS_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 16, got {n_points}"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |j| self.x(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64) -> Result<Self> {
        let p = Self { mass, hbar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParams(format!("mass must be > 0, got {}", self.mass)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidParams(format!("hbar must be > 0, got {}", self.hbar)));
        }
        Ok(())
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { mass: 1.0, hbar: 1.0 }
    }
}

/// Complex amplitudes sampled on a [`Grid1D`]. Operations return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn from_amplitudes(grid: Grid1D, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DegenerateState);
        }
        Ok(Self { grid, amplitudes })
    }

    pub(crate) fn from_raw(grid: Grid1D, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), grid.n_points());
        Self { grid, amplitudes }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Σ |ψ_j|² dx.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateState);
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_raw(self.grid, self.amplitudes.iter().map(|z| z * factor).collect())
    }

    /// Multiplies by the plane wave exp(i p x / ħ).
    pub fn boost(&self, momentum: f64, params: &PhysicalParams) -> Self {
        let amps = self
            .grid
            .points()
            .zip(&self.amplitudes)
            .map(|(x, z)| z * Complex64::from_polar(1.0, momentum * x / params.hbar))
            .collect();
        Self::from_raw(self.grid, amps)
    }

    /// Probability mass in the outermost `fraction` of the grid, (left, right).
    pub fn edge_mass(&self, fraction: f64) -> (f64, f64) {
        let n = self.grid.n_points();
        let m = ((n as f64 * fraction).ceil() as usize).clamp(1, n / 2);
        let dx = self.grid.dx();
        let left = self.amplitudes[..m].iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        let right = self.amplitudes[n - m..].iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        (left, right)
    }

    /// Rejects states with more than [`TAIL_MASS_LIMIT`] in the outer 5% of the grid.
    pub fn check_tails(&self) -> Result<()> {
        let (left, right) = self.edge_mass(0.05);
        if left > TAIL_MASS_LIMIT || right > TAIL_MASS_LIMIT {
            return Err(Error::BoundaryClipping(format!(
                "edge mass (left {left:e}, right {right:e}) exceeds {TAIL_MASS_LIMIT:e}"
            )));
        }
        Ok(())
    }

    /// Writes the `x,re,im` snapshot CSV with 17 significant digits.
    pub fn write_snapshot_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,re,im")?;
        for (x, z) in self.grid.points().zip(&self.amplitudes) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", x, z.re, z.im)?;
        }
        Ok(())
    }

    /// Parses the snapshot CSV written by [`WaveFunction::write_snapshot_csv`].
    pub fn read_snapshot_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,re,im") => {}
            other => return Err(Error::Parse(format!("bad snapshot header {other:?}"))),
        }
        let mut xs = Vec::new();
        let mut amps = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("snapshot line {}: expected 3 columns", i + 2)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("snapshot line {}: {e}", i + 2)))
            };
            xs.push(num(cols[0])?);
            amps.push(Complex64::new(num(cols[1])?, num(cols[2])?));
        }
        if xs.len() < 2 {
            return Err(Error::Parse("snapshot has fewer than two rows".into()));
        }
        let dx = xs[1] - xs[0];
        let grid = Grid1D::new(xs[0], xs[0] + dx * xs.len() as f64, xs.len())?;
        Self::from_amplitudes(grid, amps)
    }
}

/// Normalized Gaussian packet ψ ∝ exp(−(x−x₀)²/(4σ²) + i p x/ħ).
pub fn make_gaussian(
    grid: &Grid1D,
    center: f64,
    sigma: f64,
    momentum: f64,
    params: &PhysicalParams,
) -> Result<WaveFunction> {
    params.validate()?;
    if !(sigma.is_finite() && center.is_finite() && momentum.is_finite()) {
        return Err(Error::InvalidParams("non-finite packet parameters".into()));
    }
    let dx = grid.dx();
    if sigma < 4.0 * dx {
        return Err(Error::GridTooCoarse { sigma, min: 4.0 * dx });
    }
    if center < grid.x_min() + 5.0 * sigma || center > grid.x_max() - 5.0 * sigma {
        return Err(Error::BoundaryClipping(format!(
            "center {center} closer than 5 sigma to the grid edge"
        )));
    }
    let limit = 0.25 * PI * params.hbar / dx;
    if momentum.abs() > limit {
        return Err(Error::NyquistExceeded { momentum, limit });
    }
    let amps = grid
        .points()
        .map(|x| {
            let u = x - center;
            Complex64::from_polar((-u * u / (4.0 * sigma * sigma)).exp(), momentum * x / params.hbar)
        })
        .collect();
    let psi = WaveFunction::from_raw(*grid, amps).normalize()?;
    psi.check_tails()?;
    Ok(psi)
}

/// (a, b) = Σ conj(a_j) b_j dx.
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.dx())
}

/// Σ c_n Ψ_n renormalized; also returns the renormalization factor 1/‖Σ c_n Ψ_n‖.
pub fn superpose_with_factor(branches: &[(Complex64, WaveFunction)]) -> Result<(WaveFunction, f64)> {
    let (_, first) = branches.first().ok_or(Error::EmptySuperposition)?;
    let grid = first.grid;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for (c, psi) in branches {
        if psi.grid != grid {
            return Err(Error::GridMismatch);
        }
        for (a, z) in acc.iter_mut().zip(&psi.amplitudes) {
            *a += c * z;
        }
    }
    let raw = WaveFunction::from_amplitudes(grid, acc)?;
    let norm = raw.norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateState);
    }
    let factor = 1.0 / norm;
    Ok((raw.scale(Complex64::new(factor, 0.0)), factor))
}

pub fn superpose(branches: &[(Complex64, WaveFunction)]) -> Result<WaveFunction> {
    superpose_with_factor(branches).map(|(psi, _)| psi)
}
