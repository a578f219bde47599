//! Reduced intervals, geometric probabilities and seeded self-collapse of a
//! superposition of weakly interfering packets.
//!
//! Nothing here mutates the exact state: a collapse event selects a branch and
//! hands back a fresh, renormalized copy of it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{packet_summary, weakly_interfering, GateConfig, ObservableSpec, PacketSummary};
use crate::error::{Error, Result};
use crate::grid::{inner_product, superpose, PhysicalParams, WaveFunction};

/// Identity of the sampling generator, echoed into run manifests.
pub const GENERATOR_ID: &str = "rand_chacha::ChaCha8Rng seed_from_u64(seed); u = random::<f64>() in [0,1); inverse CDF";

/// Σ|c_n|² tolerance.
pub const COEFF_NORM_TOL: f64 = 1e-8;
/// Largest allowed gap between supplied and grid-extracted coefficients.
pub const COEFF_MISMATCH_TOL: f64 = 1e-6;
/// Largest branch overlap |(Ψ_n, Ψ_m)| for collapse semantics to apply.
pub const BRANCH_OVERLAP_TOL: f64 = 1e-6;

/// Deterministic generator for one seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionBranch {
    pub coefficient: Complex64,
    pub state: WaveFunction,
    pub summary: PacketSummary,
}

impl DecompositionBranch {
    pub fn weight(&self) -> f64 {
        self.coefficient.norm_sqr()
    }
}

/// Ψ = Σ c_n Ψ_n with c_n = (Ψ_n, Ψ) taken from grid inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionDecomposition {
    exact: WaveFunction,
    branches: Vec<DecompositionBranch>,
}

impl SuperpositionDecomposition {
    /// Builds Ψ from supplied (c_n, Ψ_n) and re-extracts every c_n = (Ψ_n, Ψ)
    /// from the grid; the supplied values are kept once they agree.
    pub fn from_branches(
        branches: Vec<(Complex64, WaveFunction)>,
        gate: &GateConfig,
        params: &PhysicalParams,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::EmptySuperposition);
        }
        let sum: f64 = branches.iter().map(|(c, _)| c.norm_sqr()).sum();
        if (sum - 1.0).abs() > COEFF_NORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let branches = branches
            .into_iter()
            .map(|(c, s)| Ok((c, s.normalize()?)))
            .collect::<Result<Vec<_>>>()?;
        let exact = superpose(&branches)?;
        let mut out = Vec::with_capacity(branches.len());
        for (n, (supplied, state)) in branches.into_iter().enumerate() {
            let extracted = inner_product(&state, &exact)?;
            let diff = (supplied - extracted).norm();
            if diff > COEFF_MISMATCH_TOL {
                return Err(Error::CoefficientMismatch { branch: n, diff });
            }
            let summary = packet_summary(&state, gate, params)?;
            out.push(DecompositionBranch { coefficient: supplied, state, summary });
        }
        Ok(Self { exact, branches: out })
    }

    /// Expands `psi` over `basis` with c_n = (Ψ_n, ψ).
    pub fn project(
        psi: &WaveFunction,
        basis: Vec<WaveFunction>,
        gate: &GateConfig,
        params: &PhysicalParams,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::EmptySuperposition);
        }
        let mut branches = Vec::with_capacity(basis.len());
        for state in basis {
            let state = state.normalize()?;
            let coefficient = inner_product(&state, psi)?;
            let summary = packet_summary(&state, gate, params)?;
            branches.push(DecompositionBranch { coefficient, state, summary });
        }
        let sum: f64 = branches.iter().map(DecompositionBranch::weight).sum();
        if (sum - 1.0).abs() > COEFF_NORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { exact: psi.clone(), branches })
    }

    pub fn exact_state(&self) -> &WaveFunction {
        &self.exact
    }

    pub fn branches(&self) -> &[DecompositionBranch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.branches.iter().map(|b| b.coefficient).collect()
    }

    /// |c_n|².
    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(DecompositionBranch::weight).collect()
    }

    pub fn summaries(&self) -> Vec<PacketSummary> {
        self.branches.iter().map(|b| b.summary).collect()
    }

    /// Geometric separation test on every pair plus the overlap bound.
    pub fn check_weak_interference(&self) -> Result<()> {
        let n = self.branches.len();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.branches[i], &self.branches[j]);
                if !weakly_interfering(&a.summary, &b.summary)
                    || inner_product(&a.state, &b.state)?.norm() > BRANCH_OVERLAP_TOL
                {
                    return Err(Error::NotWeaklyInterfering(i, j));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedInterval {
    /// Shared with the parent interval: ⟨x⟩_n.
    pub center: f64,
    /// Δ_{n red} x = |c_n|² Δ_n x.
    pub width: f64,
    /// Δ_n x.
    pub parent_width: f64,
    /// |c_n|².
    pub weight: f64,
}

impl ReducedInterval {
    pub fn bounds(&self) -> (f64, f64) {
        (self.center - 0.5 * self.width, self.center + 0.5 * self.width)
    }

    /// |c_n|² A(⟨x⟩_n) Δ_n x − A(⟨x⟩_n) Δ_{n red} x; zero when the local
    /// average is conserved by the reduction.
    pub fn conservation_residual(&self, a: &ObservableSpec) -> f64 {
        let value = a.eval_position(self.center).unwrap_or(0.0);
        (self.weight * value * self.parent_width - value * self.width).abs()
    }
}

pub fn reduced_intervals(decomp: &SuperpositionDecomposition) -> Result<Vec<ReducedInterval>> {
    decomp.check_weak_interference()?;
    let intervals: Vec<ReducedInterval> = decomp
        .branches
        .iter()
        .map(|b| {
            let weight = b.weight();
            ReducedInterval {
                center: b.summary.exp_x,
                width: weight * b.summary.std_x,
                parent_width: b.summary.std_x,
                weight,
            }
        })
        .collect();
    let offset = 1.0 + intervals.iter().fold(0.0f64, |m, r| m.max(r.center.abs()));
    let probe = ObservableSpec::shifted_position(offset);
    for r in &intervals {
        let scale = probe.eval_position(r.center).unwrap_or(1.0) * r.parent_width;
        debug_assert!(r.conservation_residual(&probe) <= 1e-12 * scale.max(1.0));
    }
    Ok(intervals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricProbabilities {
    /// Δ_{n red} x / Δ_n x.
    pub probabilities: Vec<f64>,
    /// Δ_n x / Σ_m Δ_m x, reported for inspection only.
    pub measure_quotient: Vec<f64>,
}

pub fn geometric_probabilities(decomp: &SuperpositionDecomposition) -> Result<GeometricProbabilities> {
    let intervals = reduced_intervals(decomp)?;
    let probabilities: Vec<f64> = intervals.iter().map(|r| r.width / r.parent_width).collect();
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > COEFF_NORM_TOL {
        return Err(Error::NotNormalized { sum });
    }
    let total_width: f64 = intervals.iter().map(|r| r.parent_width).sum();
    let measure_quotient = intervals.iter().map(|r| r.parent_width / total_width).collect();
    Ok(GeometricProbabilities { probabilities, measure_quotient })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub branch_index: usize,
    pub probability: f64,
    pub seed: u64,
    pub a_posteriori: Vec<f64>,
}

impl CollapseEvent {
    /// `{"seed":..,"branch":..,"p":..}`
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "seed": self.seed, "branch": self.branch_index, "p": self.probability })
            .to_string()
    }
}

/// Inverse-CDF draw; branch n owns the half-open slot [P_{n-1}, P_n).
pub fn sample_index(probabilities: &[f64], seed: u64) -> usize {
    let u: f64 = rng_for(seed).random();
    let mut cum = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // u landed in the rounding gap above the last partial sum
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample_collapse(decomp: &SuperpositionDecomposition, seed: u64) -> Result<CollapseEvent> {
    let probs = geometric_probabilities(decomp)?.probabilities;
    Ok(event_from(&probs, seed))
}

pub(crate) fn event_from(probabilities: &[f64], seed: u64) -> CollapseEvent {
    let branch_index = sample_index(probabilities, seed);
    let mut a_posteriori = vec![0.0; probabilities.len()];
    a_posteriori[branch_index] = 1.0;
    CollapseEvent { branch_index, probability: probabilities[branch_index], seed, a_posteriori }
}

/// The realized packet, renormalized. The decomposition is left untouched.
pub fn apply_self_collapse(decomp: &SuperpositionDecomposition, event: &CollapseEvent) -> Result<WaveFunction> {
    let branch = decomp
        .branches
        .get(event.branch_index)
        .ok_or(Error::IndexOutOfRange { index: event.branch_index, len: decomp.len() })?;
    branch.state.normalize()
}
