//! FFT helpers shared by the propagator and the momentum-space diagnostics.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid1D;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Angular wavenumbers in FFT order: 0, 1, .., N/2-1, -N/2, .., -1 (times 2π/L).
pub fn wavenumbers(grid: &Grid1D) -> Vec<f64> {
    let n = grid.n_points();
    let dk = 2.0 * PI / grid.length();
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            m * dk
        })
        .collect()
}

pub(crate) fn fft_in_place(data: &mut [Complex64]) {
    forward_plan(data.len()).process(data);
}

/// Inverse transform including the 1/N normalization.
pub(crate) fn ifft_in_place(data: &mut [Complex64]) {
    inverse_plan(data.len()).process(data);
    let scale = 1.0 / data.len() as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// Applies a diagonal multiplier in wavenumber space: F⁻¹ diag(f(k)) F ψ.
pub(crate) fn apply_k_multiplier(
    grid: &Grid1D,
    amplitudes: &[Complex64],
    f: impl Fn(f64) -> Complex64,
) -> Vec<Complex64> {
    let mut buf = amplitudes.to_vec();
    fft_in_place(&mut buf);
    for (z, k) in buf.iter_mut().zip(wavenumbers(grid)) {
        *z *= f(k);
    }
    ifft_in_place(&mut buf);
    buf
}

/// Spectral derivative of a real periodic sample, Nyquist mode dropped.
pub fn spectral_derivative_real(grid: &Grid1D, values: &[f64]) -> Vec<f64> {
    let n = grid.n_points();
    let data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let nyquist = -(PI / grid.dx());
    let out = apply_k_multiplier(grid, &data, |k| {
        if (k - nyquist).abs() < 1e-12 * k.abs().max(1.0) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k)
        }
    });
    debug_assert_eq!(out.len(), n);
    out.into_iter().map(|z| z.re).collect()
}
