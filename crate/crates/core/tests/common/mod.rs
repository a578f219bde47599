//! Independent oracles shared by the integration targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use packet_collapse::diagnostics::{packet_summary, GateConfig, ObservableSpec};
use packet_collapse::propagator::Potential;
use packet_collapse::{make_gaussian, superpose, Complex64, Grid1D, PhysicalParams, WaveFunction};
use rand::Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn zeros(n: usize) -> Matrix {
    vec![vec![Complex64::new(0.0, 0.0); n]; n]
}

fn identity(n: usize) -> Matrix {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn max_row_sum(a: &Matrix) -> f64 {
    a.iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// exp(M) by Taylor series with scaling and squaring.
pub fn expm(m: &Matrix) -> Matrix {
    let n = m.len();
    let norm = max_row_sum(m);
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let scale = 1.0 / 2f64.powi(s as i32);
    let a: Matrix = m.iter().map(|r| r.iter().map(|z| z * scale).collect()).collect();
    let mut result = identity(n);
    let mut term = identity(n);
    for j in 1..=24 {
        term = matmul(&term, &a);
        let inv = 1.0 / j as f64;
        for row in term.iter_mut() {
            for z in row.iter_mut() {
                *z *= inv;
            }
        }
        for (r, t) in result.iter_mut().zip(&term) {
            for (x, y) in r.iter_mut().zip(t) {
                *x += y;
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

/// Dense H = T + V with T built from an explicit DFT sum over the grid modes.
pub fn dense_hamiltonian(grid: &Grid1D, v: &Potential, params: &PhysicalParams) -> Matrix {
    let n = grid.n_points();
    let dk = 2.0 * PI / grid.length();
    let modes: Vec<f64> = (0..n).map(|j| (j as f64 - (n / 2) as f64) * dk).collect();
    let mut h = zeros(n);
    for (i, row) in h.iter_mut().enumerate() {
        for (l, cell) in row.iter_mut().enumerate() {
            let d = grid.x(i) - grid.x(l);
            let mut t = Complex64::new(0.0, 0.0);
            for &k in &modes {
                t += Complex64::from_polar(params.hbar * params.hbar * k * k / (2.0 * params.mass), k * d);
            }
            *cell = t / n as f64;
        }
    }
    let values = v.values(grid, params);
    for (i, vi) in values.iter().enumerate() {
        h[i][i] += vi;
    }
    h
}

/// exp(−iH dt/ħ) as a dense matrix.
pub fn dense_propagator(grid: &Grid1D, v: &Potential, params: &PhysicalParams, dt: f64) -> Matrix {
    let h = dense_hamiltonian(grid, v, params);
    let f = Complex64::new(0.0, -dt / params.hbar);
    let m: Matrix = h.iter().map(|r| r.iter().map(|z| z * f).collect()).collect();
    expm(&m)
}

pub fn apply(m: &Matrix, psi: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|r| r.iter().zip(psi).map(|(a, b)| a * b).sum()).collect()
}

/// sqrt(Σ|a−b|² dx).
pub fn l2_distance(a: &[Complex64], b: &[Complex64], dx: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * dx).sqrt()
}

/// Trapezoid moment ∫ f(x)|ψ(x)|² dx on the analytic Gaussian, independent of the grid code.
pub fn gaussian_moment(center: f64, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = (center - 12.0 * sigma, center + 12.0 * sigma);
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let rho = |x: f64| {
        let u = x - center;
        (-u * u / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
    };
    let mut s = 0.5 * (f(lo) * rho(lo) + f(hi) * rho(hi));
    for j in 1..n {
        let x = lo + j as f64 * h;
        s += f(x) * rho(x);
    }
    s * h
}

/// Random probability vector with every entry ≥ `floor`.
pub fn random_weights<R: Rng>(rng: &mut R, d: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| floor + (1.0 - floor * d as f64) * r / total).collect()
}

/// Coefficients with |c_n|² = weights and random phases.
pub fn random_coefficients<R: Rng>(rng: &mut R, weights: &[f64]) -> Vec<Complex64> {
    weights.iter().map(|w| Complex64::from_polar(w.sqrt(), 2.0 * PI * rng.random::<f64>())).collect()
}

/// Branch packets of width σ laid out left to right with the given gaps.
pub fn packets_with_gaps(grid: &Grid1D, start: f64, sigma: f64, gaps: &[f64], params: &PhysicalParams) -> Vec<WaveFunction> {
    let mut x = start;
    let mut out = vec![make_gaussian(grid, x, sigma, 0.0, params).unwrap()];
    for g in gaps {
        x += g;
        out.push(make_gaussian(grid, x, sigma, 0.0, params).unwrap());
    }
    out
}

/// Cat state Σ c_n Ψ_n with random weights, phases and gaps of 10σ..16σ.
pub fn random_cat<R: Rng>(rng: &mut R, grid: &Grid1D, params: &PhysicalParams) -> (Vec<Complex64>, WaveFunction) {
    let d = rng.random_range(2..=4);
    let sigma = 1.0;
    let gaps: Vec<f64> = (0..d - 1).map(|_| sigma * rng.random_range(10.0..16.0)).collect();
    let start = -0.5 * gaps.iter().sum::<f64>();
    let packets = packets_with_gaps(grid, start, sigma, &gaps, params);
    let weights = random_weights(rng, d, 0.05);
    let coeffs = random_coefficients(rng, &weights);
    let branches: Vec<_> = coeffs.iter().copied().zip(packets).collect();
    (coeffs, superpose(&branches).unwrap())
}

/// x + C with C the least shift keeping it positive on the support.
pub fn minimally_positive_position(psi: &WaveFunction, gate: &GateConfig, params: &PhysicalParams) -> ObservableSpec {
    let s = packet_summary(psi, gate, params).unwrap();
    let (lo, hi) = s.support;
    ObservableSpec::shifted_position(-lo + 1e-6 * (hi - lo))
}
