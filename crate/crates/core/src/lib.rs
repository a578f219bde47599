//! One-dimensional wave-packet dynamics with spontaneous superposition
//! breaking: exact spectral evolution, wave-packet and weak-interference
//! gates, and seeded self-collapse once branch separations pass their
//! critical value.

pub mod collapse;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod measurement;
pub mod propagator;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{inner_product, make_gaussian, superpose, Grid1D, PhysicalParams, WaveFunction};
pub use num_complex::Complex64;
