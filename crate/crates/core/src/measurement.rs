//! Object + apparatus measurement chain.
//!
//! The object is a d-level system; the apparatus is a pointer packet on the
//! grid. For the coupling time τ, branch n's pointer is driven by the
//! generator n·v·p̂, so adjacent branch separations open at speed v and reach
//! at least d_sep by the end of the run. Once the minimum separation stays
//! above the pairwise width scale, the apparatus superposition may
//! self-collapse and the object is left as a mixture.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collapse::{
    apply_self_collapse, event_from, geometric_probabilities, CollapseEvent, SuperpositionDecomposition,
};
use crate::diagnostics::{order_parameters, packet_summary, wave_packet_gate, GateConfig, ObservableSpec, PacketSummary};
use crate::error::{Error, Result};
use crate::grid::{inner_product, PhysicalParams, WaveFunction};
use crate::propagator::{Potential, Propagator};

pub const OBJECT_NORM_TOL: f64 = 1e-10;
pub const COMPOSITE_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    amplitudes: Vec<Complex64>,
}

impl ObjectState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidObjectState("object needs at least one level".into()));
        }
        let sum: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !((sum - 1.0).abs() <= OBJECT_NORM_TOL) {
            return Err(Error::InvalidObjectState(format!("sum |c_n|^2 = {sum}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeBranch {
    pub object_index: usize,
    pub coefficient: Complex64,
    pub apparatus: WaveFunction,
}

/// Σ_n c_n |n⟩ ⊗ Ψ²_n, one grid field per non-zero object amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    object_dim: usize,
    branches: Vec<CompositeBranch>,
}

impl CompositeState {
    pub fn new(object_dim: usize, branches: Vec<CompositeBranch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::EmptySuperposition);
        }
        if let Some(b) = branches.iter().find(|b| b.object_index >= object_dim) {
            return Err(Error::IndexOutOfRange { index: b.object_index, len: object_dim });
        }
        let grid = branches[0].apparatus.grid();
        if branches.iter().any(|b| b.apparatus.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        let state = Self { object_dim, branches };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > COMPOSITE_NORM_TOL {
            return Err(Error::NotNormalized { sum: norm });
        }
        Ok(state)
    }

    pub fn object_dim(&self) -> usize {
        self.object_dim
    }

    pub fn branches(&self) -> &[CompositeBranch] {
        &self.branches
    }

    /// Σ |c_n|² ‖Ψ²_n‖².
    pub fn norm_sqr(&self) -> f64 {
        self.branches.iter().map(|b| b.coefficient.norm_sqr() * b.apparatus.norm_sqr()).sum()
    }

    /// |c_n|² laid out over all d object levels.
    pub fn object_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.object_dim];
        for b in &self.branches {
            w[b.object_index] = b.coefficient.norm_sqr();
        }
        w
    }

    /// True iff every branch carries the identical apparatus field.
    pub fn is_product(&self) -> bool {
        let first = &self.branches[0].apparatus;
        self.branches.iter().all(|b| &b.apparatus == first)
    }

    pub fn is_entangled(&self) -> bool {
        !self.is_product()
    }

    pub fn apparatus_summaries(&self, gate: &GateConfig, params: &PhysicalParams) -> Result<Vec<PacketSummary>> {
        self.branches.iter().map(|b| packet_summary(&b.apparatus, gate, params)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Speed at which adjacent pointer branches separate.
    pub shift_velocity: f64,
    /// Minimum spacing between adjacent pointer branches at the end of coupling.
    pub d_sep: f64,
    /// Coupling duration.
    pub tau: f64,
}

impl CouplingConfig {
    pub fn validate(&self, apparatus_sigma: f64) -> Result<()> {
        if !(self.shift_velocity > 0.0 && self.shift_velocity.is_finite()) {
            return Err(Error::InvalidCoupling(format!(
                "shift_velocity must be > 0, got {}",
                self.shift_velocity
            )));
        }
        if !(self.d_sep >= 3.0 * apparatus_sigma) {
            return Err(Error::InvalidCoupling(format!(
                "d_sep {} is below 3 x apparatus sigma {apparatus_sigma}",
                self.d_sep
            )));
        }
        if !(self.tau * self.shift_velocity >= self.d_sep) {
            return Err(Error::InvalidCoupling(format!(
                "tau * shift_velocity = {} does not reach d_sep {}",
                self.tau * self.shift_velocity,
                self.d_sep
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterSample {
    pub t: f64,
    pub min_separation: f64,
    pub critical_value: f64,
}

impl OrderParameterSample {
    pub fn crossed(&self) -> bool {
        self.min_separation >= self.critical_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub critical_time: Option<f64>,
    pub series: Vec<OrderParameterSample>,
}

impl TransitionReport {
    pub fn transition_sample(&self) -> Option<&OrderParameterSample> {
        let t = self.critical_time?;
        self.series.iter().find(|s| s.t == t)
    }
}

/// Earliest sample from which the crossing holds through the end of the run.
pub fn detect_transition(series: &[OrderParameterSample]) -> TransitionReport {
    let persistent_from = series.iter().rposition(|s| !s.crossed()).map_or(0, |i| i + 1);
    let critical_time = series.get(persistent_from).map(|s| s.t);
    TransitionReport { critical_time, series: series.to_vec() }
}

/// Product state Σ c_n |n⟩ ⊗ Ψ²_ready; zero amplitudes carry no branch.
pub fn premeasurement(
    object: &ObjectState,
    apparatus_ready: &WaveFunction,
    pointer: &[ObservableSpec],
    gate: &GateConfig,
    params: &PhysicalParams,
) -> Result<CompositeState> {
    let verdict = wave_packet_gate(apparatus_ready, pointer, gate, params).map_err(|e| match e {
        Error::ObservableNotPositiveOnSupport { .. } => Error::ApparatusNotReady,
        other => other,
    })?;
    if !verdict.is_wave_packet {
        return Err(Error::ApparatusNotReady);
    }
    let apparatus = apparatus_ready.normalize()?;
    let branches = object
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(n, &c)| CompositeBranch { object_index: n, coefficient: c, apparatus: apparatus.clone() })
        .collect();
    CompositeState::new(object.dim(), branches)
}

/// Per-step record handed to the coupling observer.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSample {
    pub t: f64,
    pub norm_sqr: f64,
    pub summaries: Vec<PacketSummary>,
    pub order: Option<OrderParameterSample>,
}

pub fn von_neumann_evolve(
    state: &CompositeState,
    cfg: &CouplingConfig,
    v: &Potential,
    params: &PhysicalParams,
    dt: f64,
    gate: &GateConfig,
) -> Result<(CompositeState, TransitionReport)> {
    von_neumann_evolve_observed(state, cfg, v, params, dt, gate, |_| {})
}

/// Runs the coupling for `tau`, sampling order parameters at every step.
#[allow(clippy::too_many_arguments)]
pub fn von_neumann_evolve_observed<F>(
    state: &CompositeState,
    cfg: &CouplingConfig,
    v: &Potential,
    params: &PhysicalParams,
    dt: f64,
    gate: &GateConfig,
    mut observer: F,
) -> Result<(CompositeState, TransitionReport)>
where
    F: FnMut(&CouplingSample),
{
    gate.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(format!("dt must be > 0, got {dt}")));
    }
    let initial = state.apparatus_summaries(gate, params)?;
    let sigma0 = initial.iter().fold(0.0f64, |m, s| m.max(s.std_x));
    cfg.validate(sigma0)?;

    let grid = *state.branches[0].apparatus.grid();
    let n_steps = (cfg.tau / dt).round().max(1.0) as usize;
    let lanes = state
        .branches
        .iter()
        .map(|b| Propagator::with_drift(&grid, v, params, dt, b.object_index as f64 * cfg.shift_velocity))
        .collect::<Result<Vec<_>>>()?;

    let mut branches = state.branches.clone();
    let mut series = Vec::with_capacity(n_steps + 1);
    let mut record = |t: f64, branches: &[CompositeBranch], summaries: Vec<PacketSummary>| -> Result<()> {
        let order = if summaries.len() >= 2 {
            let op = order_parameters(&summaries)?;
            Some(OrderParameterSample {
                t,
                min_separation: op.min_pairwise_separation,
                critical_value: op.critical_value,
            })
        } else {
            None
        };
        if let Some(o) = order {
            series.push(o);
        }
        let norm_sqr = branches.iter().map(|b| b.coefficient.norm_sqr() * b.apparatus.norm_sqr()).sum();
        observer(&CouplingSample { t, norm_sqr, summaries, order });
        Ok(())
    };
    record(0.0, &branches, initial)?;

    for i in 0..n_steps {
        for (b, lane) in branches.iter_mut().zip(&lanes) {
            b.apparatus = lane.step(&b.apparatus)?;
        }
        let summaries = branches
            .iter()
            .map(|b| packet_summary(&b.apparatus, gate, params))
            .collect::<Result<Vec<_>>>()?;
        record((i + 1) as f64 * dt, &branches, summaries)?;
    }

    let report = detect_transition(&series);
    if report.critical_time.is_none() && branches.len() >= 2 {
        log::warn!("{}", Error::NoTransitionWithinTau { tau: cfg.tau });
    }
    let evolved = CompositeState { object_dim: state.object_dim, branches };
    Ok((evolved, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub event: CollapseEvent,
    pub apparatus_state: WaveFunction,
    /// |c_n|² over all d object levels.
    pub object_mixture: Vec<f64>,
    pub realized_object_index: usize,
}

/// A post-transition apparatus decomposition, reusable across many seeds.
#[derive(Debug, Clone)]
pub struct PreparedMeasurement<'a> {
    state: &'a CompositeState,
    decomp: SuperpositionDecomposition,
    probabilities: Vec<f64>,
}

impl<'a> PreparedMeasurement<'a> {
    pub fn new(
        state: &'a CompositeState,
        report: &TransitionReport,
        gate: &GateConfig,
        params: &PhysicalParams,
    ) -> Result<Self> {
        if report.critical_time.is_none() {
            return Err(Error::TransitionNotReached);
        }
        let branches = state.branches.iter().map(|b| (b.coefficient, b.apparatus.clone())).collect();
        let decomp = SuperpositionDecomposition::from_branches(branches, gate, params)?;
        let probabilities = geometric_probabilities(&decomp)?.probabilities;
        Ok(Self { state, decomp, probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn decomposition(&self) -> &SuperpositionDecomposition {
        &self.decomp
    }

    /// Branch index only, for large ensembles.
    pub fn sample_object_index(&self, seed: u64) -> usize {
        let event = event_from(&self.probabilities, seed);
        self.state.branches[event.branch_index].object_index
    }

    pub fn measure(&self, seed: u64) -> Result<MeasurementOutcome> {
        let event = event_from(&self.probabilities, seed);
        let apparatus_state = apply_self_collapse(&self.decomp, &event)?;
        let realized_object_index = self.state.branches[event.branch_index].object_index;
        Ok(MeasurementOutcome {
            event,
            apparatus_state,
            object_mixture: self.state.object_weights(),
            realized_object_index,
        })
    }
}

/// Self-collapse on the apparatus, relative collapse on the object.
pub fn measure(
    state: &CompositeState,
    report: &TransitionReport,
    seed: u64,
    gate: &GateConfig,
    params: &PhysicalParams,
) -> Result<MeasurementOutcome> {
    PreparedMeasurement::new(state, report, gate, params)?.measure(seed)
}

/// |(Ψ²_n, Ψ²_m)| for every branch pair.
pub fn pointer_distinguishability(state: &CompositeState) -> Result<Vec<Vec<f64>>> {
    let n = state.branches.len();
    if n < 2 {
        return Err(Error::TooFewPackets(n));
    }
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let o = inner_product(&state.branches[i].apparatus, &state.branches[j].apparatus)?.norm();
            out[i][j] = o;
            out[j][i] = o;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_gaussian, superpose, Grid1D};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn sample(t: f64, sep: f64) -> OrderParameterSample {
        OrderParameterSample { t, min_separation: sep, critical_value: 1.0 }
    }

    fn setup() -> (WaveFunction, Vec<ObservableSpec>, GateConfig, PhysicalParams) {
        let g = Grid1D::new(-20.0, 40.0, 1024).unwrap();
        let p = PhysicalParams { mass: 100.0, hbar: 1.0 };
        let ready = make_gaussian(&g, 0.0, 1.0, 0.0, &p).unwrap();
        let gate = GateConfig { k: 6.0, ..GateConfig::default() };
        (ready, vec![ObservableSpec::shifted_position(20.0)], gate, p)
    }

    #[test]
    fn first_persistent_crossing() {
        let s: Vec<_> = [0.2, 0.8, 1.4, 2.0].iter().enumerate().map(|(i, &x)| sample(i as f64, x)).collect();
        assert_eq!(detect_transition(&s).critical_time, Some(2.0));
        let below: Vec<_> = [0.2, 0.5].iter().enumerate().map(|(i, &x)| sample(i as f64, x)).collect();
        assert_eq!(detect_transition(&below).critical_time, None);
        let bounce: Vec<_> =
            [0.2, 1.2, 0.9, 1.1, 1.5].iter().enumerate().map(|(i, &x)| sample(i as f64, x)).collect();
        assert_eq!(detect_transition(&bounce).critical_time, Some(3.0));
        assert_eq!(detect_transition(&[]).critical_time, None);
    }

    #[test]
    fn object_state_validation() {
        assert!(ObjectState::new(vec![c(0.6), c(0.8001)]).is_err());
        assert!(ObjectState::new(vec![]).is_err());
        assert_eq!(ObjectState::new(vec![c(0.6), c(0.8)]).unwrap().dim(), 2);
    }

    #[test]
    fn premeasurement_is_product() {
        let (ready, pointer, gate, p) = setup();
        let obj = ObjectState::new(vec![c(0.6), c(0.8)]).unwrap();
        let s = premeasurement(&obj, &ready, &pointer, &gate, &p).unwrap();
        assert_eq!(s.branches().len(), 2);
        assert!(s.is_product() && !s.is_entangled());
        let m = pointer_distinguishability(&s).unwrap();
        assert!((m[0][1] - 1.0).abs() < 1e-10 && (m[0][0] - 1.0).abs() < 1e-10);

        let degenerate = ObjectState::new(vec![c(1.0), c(0.0)]).unwrap();
        let s = premeasurement(&degenerate, &ready, &pointer, &gate, &p).unwrap();
        assert_eq!(s.branches().len(), 1);
        assert_eq!(s.object_weights(), vec![1.0, 0.0]);
    }

    #[test]
    fn double_hump_apparatus_not_ready() {
        let (ready, pointer, gate, p) = setup();
        let other = make_gaussian(ready.grid(), 20.0, 1.0, 0.0, &p).unwrap();
        let h = c(std::f64::consts::FRAC_1_SQRT_2);
        let hump = superpose(&[(h, ready), (h, other)]).unwrap();
        let obj = ObjectState::new(vec![c(0.6), c(0.8)]).unwrap();
        assert_eq!(premeasurement(&obj, &hump, &pointer, &gate, &p), Err(Error::ApparatusNotReady));
    }

    #[test]
    fn coupling_config_invariants() {
        let ok = CouplingConfig { shift_velocity: 1.0, d_sep: 10.0, tau: 12.0 };
        assert!(ok.validate(1.0).is_ok());
        assert!(CouplingConfig { d_sep: 2.0, ..ok }.validate(1.0).is_err());
        assert!(CouplingConfig { tau: 5.0, ..ok }.validate(1.0).is_err());
        assert!(CouplingConfig { shift_velocity: 0.0, ..ok }.validate(1.0).is_err());
    }

    #[test]
    fn single_branch_has_no_transition() {
        let (ready, pointer, gate, p) = setup();
        let obj = ObjectState::new(vec![c(1.0)]).unwrap();
        let s = premeasurement(&obj, &ready, &pointer, &gate, &p).unwrap();
        let cfg = CouplingConfig { shift_velocity: 1.0, d_sep: 10.0, tau: 10.0 };
        let (out, report) = von_neumann_evolve(&s, &cfg, &Potential::Free, &p, 0.05, &gate).unwrap();
        assert!(report.series.is_empty() && report.critical_time.is_none());
        assert!(!out.is_entangled());
        assert_eq!(measure(&out, &report, 0, &gate, &p).unwrap_err(), Error::TransitionNotReached);
    }
}
