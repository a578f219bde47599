//! Scenario runs: one validated config in, one run directory out.
//!
//! Every run writes `manifest.json`, even when the physics fails. All other
//! artifacts are byte-identical across repeated runs of the same config and
//! seed; the manifest additionally records wall time.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::collapse::{
    apply_self_collapse, geometric_probabilities, sample_collapse, sample_index, SuperpositionDecomposition,
    GENERATOR_ID,
};
use crate::config::{ScenarioConfig, ScenarioKind};
use crate::diagnostics::{
    ehrenfest_residual, packet_summary, wave_packet_gate, GateConfig, ObservableSpec, PacketSummary,
};
use crate::error::{Error, Result};
use crate::grid::{PhysicalParams, WaveFunction};
use crate::measurement::{
    pointer_distinguishability, premeasurement, von_neumann_evolve_observed, ObjectState, PreparedMeasurement,
};
use crate::propagator::{Potential, Propagator};

pub const OUTPUT_ENV: &str = "PACKET_COLLAPSE_OUT";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const COLLAPSE_FILE: &str = "collapse.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

const TIMESERIES_HEADER: &str =
    "t,norm,exp_x,std_x,exp_p,std_p,uncertainty_product,min_separation,critical_value,transition_flag";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    /// `value <= tol`, with both in the detail.
    fn within(name: &str, value: f64, tol: f64) -> Self {
        Self::new(name, value <= tol, format!("{value:.3e} <= {tol:.1e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: ScenarioKind,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub generator: &'static str,
    pub crate_version: &'static str,
    pub config: ScenarioConfig,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
    pub assertions: Vec<Assertion>,
    pub status: RunStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.status == RunStatus::Passed
    }
}

/// sha256 of the config with seed and output location removed.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let mut physics_only = cfg.clone();
    physics_only.seed = None;
    physics_only.output_dir = None;
    let json = serde_json::to_string(&physics_only).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_dir_name(cfg: &ScenarioConfig) -> String {
    let seed = cfg.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("{}-{}-seed{}", cfg.scenario.name(), &config_hash(cfg)[..16], seed)
}

/// `--out`, then the environment, then the config, then `runs`.
pub fn resolve_output_root(cli: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
}

/// One row of `timeseries.csv`; order fields stay empty for single packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeseriesRow {
    pub t: f64,
    pub norm: f64,
    pub summary: PacketSummary,
    pub order: Option<(f64, f64)>,
}

impl TimeseriesRow {
    fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let s = &self.summary;
        write!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},",
            self.t,
            self.norm,
            s.exp_x,
            s.std_x,
            s.exp_p,
            s.std_p,
            s.uncertainty_product()
        )?;
        match self.order {
            Some((sep, crit)) => writeln!(out, "{sep:.16e},{crit:.16e},{}", u8::from(sep >= crit)),
            None => writeln!(out, ",,"),
        }
    }
}

struct RunContext {
    dir: PathBuf,
    artifacts: Vec<String>,
    assertions: Vec<Assertion>,
}

impl RunContext {
    fn path(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        self.dir.join(name)
    }

    fn write_timeseries(&mut self, rows: &[TimeseriesRow]) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(self.path(TIMESERIES_FILE))?);
        writeln!(out, "{TIMESERIES_HEADER}")?;
        for r in rows {
            r.write(&mut out)?;
        }
        out.flush()?;
        Ok(())
    }

    fn write_snapshot(&mut self, name: &str, psi: &WaveFunction) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(self.path(name))?);
        psi.write_snapshot_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    fn write_lines(&mut self, name: &str, lines: impl IntoIterator<Item = String>) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(self.path(name))?);
        for l in lines {
            writeln!(out, "{l}")?;
        }
        out.flush()?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }

    fn check(&mut self, a: Assertion) {
        if !a.passed {
            log::warn!("assertion {} failed: {}", a.name, a.detail);
        }
        self.assertions.push(a);
    }
}

/// Runs `cfg` under `out_root`. Errors only when the directory or manifest
/// cannot be written; physics failures land in the manifest.
pub fn run(cfg: &ScenarioConfig, out_root: &Path) -> Result<RunOutcome> {
    let run_dir = out_root.join(run_dir_name(cfg));
    fs::create_dir_all(&run_dir)?;
    let start = Instant::now();
    let mut ctx = RunContext { dir: run_dir.clone(), artifacts: Vec::new(), assertions: Vec::new() };
    let result = match cfg.scenario {
        ScenarioKind::FreeSpread => run_free_spread(cfg, &mut ctx),
        ScenarioKind::HarmonicCoherent => run_harmonic(cfg, &mut ctx),
        ScenarioKind::CatGate => run_cat_gate(cfg, &mut ctx),
        ScenarioKind::CollapseSample => run_collapse_sample(cfg, &mut ctx),
        ScenarioKind::BornEnsemble => run_born_ensemble(cfg, &mut ctx),
        ScenarioKind::MeasurementRun => run_measurement(cfg, &mut ctx),
    };
    let (status, error) = match result {
        Err(e) => (RunStatus::Error, Some(e.to_string())),
        Ok(()) if ctx.assertions.iter().all(|a| a.passed) => (RunStatus::Passed, None),
        Ok(()) => (RunStatus::Failed, None),
    };
    ctx.path(MANIFEST_FILE);
    ctx.artifacts.sort();
    let manifest = RunManifest {
        scenario: cfg.scenario,
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        generator: GENERATOR_ID,
        crate_version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        artifacts: ctx.artifacts.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        assertions: ctx.assertions,
        status,
        error,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(run_dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(RunOutcome { run_dir, manifest })
}

fn single_row(t: f64, psi: &WaveFunction, gate: &GateConfig, params: &PhysicalParams) -> Result<TimeseriesRow> {
    Ok(TimeseriesRow { t, norm: psi.norm(), summary: packet_summary(psi, gate, params)?, order: None })
}

fn run_free_spread(cfg: &ScenarioConfig, ctx: &mut RunContext) -> Result<()> {
    let params = cfg.physics;
    let psi0 = cfg.initial_packet()?;
    let s0 = packet_summary(&psi0, &cfg.gate, &params)?;
    let ev = cfg.evolution;
    let prop = Propagator::new(psi0.grid(), &cfg.potential, &params, ev.dt)?;
    let mut rows = vec![single_row(0.0, &psi0, &cfg.gate, &params)?];
    let mut psi = psi0.clone();
    for i in 1..=ev.n_steps {
        psi = prop.step(&psi)?;
        if i % ev.record_every == 0 || i == ev.n_steps {
            rows.push(single_row(i as f64 * ev.dt, &psi, &cfg.gate, &params)?);
        }
    }
    let sigma0 = cfg.packet.sigma;
    let spread = |t: f64| {
        let r = params.hbar * t / (2.0 * params.mass * sigma0 * sigma0);
        sigma0 * (1.0 + r * r).sqrt()
    };
    let width_err = rows.iter().map(|r| (r.summary.std_x - spread(r.t)).abs()).fold(0.0, f64::max);
    let drift_err = rows
        .iter()
        .map(|r| (r.summary.exp_x - s0.exp_x - s0.exp_p / params.mass * r.t).abs())
        .fold(0.0, f64::max);
    let norm_err = rows.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max);
    ctx.check(Assertion::within("spreading_law", width_err, 1e-6));
    ctx.check(Assertion::within("free_drift", drift_err, 1e-6));
    ctx.check(Assertion::within("norm_conserved", norm_err, 1e-10));
    ctx.write_timeseries(&rows)?;
    ctx.write_snapshot("snapshot_initial.csv", &psi0)?;
    ctx.write_snapshot("snapshot_final.csv", &psi)?;
    Ok(())
}

fn run_harmonic(cfg: &ScenarioConfig, ctx: &mut RunContext) -> Result<()> {
    let params = cfg.physics;
    let (omega, center) = match cfg.potential {
        Potential::Harmonic { omega, center } => (omega, center),
        _ => return Err(Error::Validation("harmonic_coherent requires a harmonic potential".into())),
    };
    let psi0 = cfg.initial_packet()?;
    let s0 = packet_summary(&psi0, &cfg.gate, &params)?;
    let ev = cfg.evolution;
    let prop = Propagator::new(psi0.grid(), &cfg.potential, &params, ev.dt)?;
    let classical = |t: f64| {
        center + (s0.exp_x - center) * (omega * t).cos() + s0.exp_p / (params.mass * omega) * (omega * t).sin()
    };

    let mut rows = vec![single_row(0.0, &psi0, &cfg.gate, &params)?];
    let mut window: Vec<(f64, WaveFunction)> = vec![(0.0, psi0.clone())];
    let (mut ehr_x, mut ehr_p, mut traj_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut psi = psi0.clone();
    for i in 1..=ev.n_steps {
        psi = prop.step(&psi)?;
        let t = i as f64 * ev.dt;
        window.push((t, psi.clone()));
        if window.len() > 3 {
            window.remove(0);
        }
        if window.len() == 3 {
            let r = ehrenfest_residual(&window, &cfg.potential, &params)?;
            ehr_x = ehr_x.max(r.max_x());
            ehr_p = ehr_p.max(r.max_p());
        }
        if i % ev.record_every == 0 || i == ev.n_steps {
            let row = single_row(t, &psi, &cfg.gate, &params)?;
            traj_err = traj_err.max((row.summary.exp_x - classical(t)).abs());
            rows.push(row);
        }
    }
    let norm_err = rows.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max);
    ctx.check(Assertion::within("classical_trajectory", traj_err, 1e-5));
    ctx.check(Assertion::within("ehrenfest_position", ehr_x, 1e-6));
    ctx.check(Assertion::within("ehrenfest_momentum", ehr_p, 1e-6));
    ctx.check(Assertion::within("norm_conserved", norm_err, 1e-10));
    ctx.write_timeseries(&rows)?;
    ctx.write_snapshot("snapshot_initial.csv", &psi0)?;
    ctx.write_snapshot("snapshot_final.csv", &psi)?;
    Ok(())
}

/// Offset C making x + C a dominant, positive pointer for a packet: ⟨x⟩ + C
/// sits 2η widths above zero.
pub fn pointer_offset(summary: &PacketSummary, gate: &GateConfig) -> f64 {
    let lift = (2.0 * gate.eta).max(gate.k) * summary.std_x;
    lift - summary.exp_x
}

/// Smallest C keeping x + C positive on the support, within a relative margin.
pub fn minimal_positive_offset(summary: &PacketSummary) -> f64 {
    let (lo, hi) = summary.support;
    -lo + 1e-6 * (hi - lo)
}

fn build_decomposition(cfg: &ScenarioConfig) -> Result<SuperpositionDecomposition> {
    let packets = cfg.branch_packets()?;
    let branches = cfg.coefficients.iter().copied().zip(packets).collect();
    SuperpositionDecomposition::from_branches(branches, &cfg.gate, &cfg.physics)
}

fn branch_weights(cfg: &ScenarioConfig) -> Vec<f64> {
    cfg.coefficients.iter().map(|c| c.norm_sqr()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Serialize)]
struct CatReport {
    cat_summary: PacketSummary,
    cat_offset: f64,
    cat_ratio: f64,
    cat_is_wave_packet: bool,
    branch_summaries: Vec<PacketSummary>,
    branch_offsets: Vec<f64>,
    branch_is_wave_packet: Vec<bool>,
    probabilities: Vec<f64>,
    measure_quotient: Vec<f64>,
}

fn run_cat_gate(cfg: &ScenarioConfig, ctx: &mut RunContext) -> Result<()> {
    let params = cfg.physics;
    let decomp = build_decomposition(cfg)?;
    let cat = decomp.exact_state();
    let cat_summary = packet_summary(cat, &cfg.gate, &params)?;
    let cat_offset = minimal_positive_offset(&cat_summary);
    let cat_verdict = wave_packet_gate(cat, &[ObservableSpec::shifted_position(cat_offset)], &cfg.gate, &params)?;

    let mut branch_offsets = Vec::new();
    let mut branch_is_wave_packet = Vec::new();
    for b in decomp.branches() {
        let c = pointer_offset(&b.summary, &cfg.gate);
        let v = wave_packet_gate(&b.state, &[ObservableSpec::shifted_position(c)], &cfg.gate, &params)?;
        branch_offsets.push(c);
        branch_is_wave_packet.push(v.is_wave_packet);
    }
    let weak = decomp.check_weak_interference();
    let geo = geometric_probabilities(&decomp)?;

    let many = decomp.len() >= 2;
    ctx.check(Assertion::new(
        "cat_fails_gate",
        !many || !cat_verdict.is_wave_packet,
        format!("ratio {:.3e}, mass {:.6}", cat_verdict.per_observable[0].ratio, cat_verdict.mass_in_support),
    ));
    ctx.check(Assertion::new(
        "branches_pass_gate",
        branch_is_wave_packet.iter().all(|&b| b),
        format!("{branch_is_wave_packet:?}"),
    ));
    ctx.check(Assertion::new(
        "weakly_interfering",
        !many || weak.is_ok(),
        weak.as_ref().err().map_or_else(|| "all pairs".to_string(), |e| e.to_string()),
    ));
    ctx.check(Assertion::within(
        "geometric_probabilities",
        max_abs_diff(&geo.probabilities, &branch_weights(cfg)),
        1e-8,
    ));
    ctx.write_snapshot("snapshot_cat.csv", cat)?;
    ctx.write_json(
        SUMMARY_FILE,
        &CatReport {
            cat_summary,
            cat_offset,
            cat_ratio: cat_verdict.per_observable[0].ratio,
            cat_is_wave_packet: cat_verdict.is_wave_packet,
            branch_summaries: decomp.summaries(),
            branch_offsets,
            branch_is_wave_packet,
            probabilities: geo.probabilities,
            measure_quotient: geo.measure_quotient,
        },
    )?;
    Ok(())
}

fn run_collapse_sample(cfg: &ScenarioConfig, ctx: &mut RunContext) -> Result<()> {
    let seed = cfg.seed.ok_or_else(|| Error::Validation("seed required".into()))?;
    let decomp = build_decomposition(cfg)?;
    decomp.check_weak_interference()?;
    let before = decomp.exact_state().clone();
    let geo = geometric_probabilities(&decomp)?;
    let event = sample_collapse(&decomp, seed)?;
    let collapsed = apply_self_collapse(&decomp, &event)?;

    let chosen = &decomp.branches()[event.branch_index].state;
    let branch_err = collapsed
        .amplitudes()
        .iter()
        .zip(chosen.amplitudes())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ctx.check(Assertion::within(
        "geometric_probabilities",
        max_abs_diff(&geo.probabilities, &branch_weights(cfg)),
        1e-8,
    ));
    ctx.check(Assertion::within("collapsed_to_branch", branch_err, 1e-12));
    ctx.check(Assertion::new(
        "exact_state_untouched",
        decomp.exact_state() == &before,
        "bitwise comparison".into(),
    ));
    match cfg.n_runs() {
        Some(n) => {
            let (report, lines) = run_ensemble(&geo.probabilities, seed, n);
            ctx.check(born_assertion(&report));
            ctx.write_lines(COLLAPSE_FILE, lines)?;
            ctx.write_json(SUMMARY_FILE, &report)?;
        }
        None => ctx.write_lines(COLLAPSE_FILE, [event.to_json_line()])?,
    }
    ctx.write_snapshot("snapshot_exact.csv", decomp.exact_state())?;
    ctx.write_snapshot("snapshot_collapsed.csv", &collapsed)?;
    Ok(())
}

/// Binomial 3σ band check on every branch; returns (worst z, counts).
fn born_counts_check(counts: &[u64], probs: &[f64], n: u64) -> (f64, bool) {
    let mut worst = 0.0f64;
    for (&k, &p) in counts.iter().zip(probs) {
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        let dev = (k as f64 - n as f64 * p).abs();
        let z = if sd > 0.0 { dev / sd } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    (worst, worst <= 3.0)
}

#[derive(Serialize)]
struct EnsembleReport {
    n_runs: u64,
    first_seed: u64,
    probabilities: Vec<f64>,
    counts: Vec<u64>,
    frequencies: Vec<f64>,
    worst_z: f64,
}

/// Samples `n` consecutive seeds from `seed`; returns the report and one JSON line per draw.
fn run_ensemble(probs: &[f64], seed: u64, n: u64) -> (EnsembleReport, Vec<String>) {
    let mut counts = vec![0u64; probs.len()];
    let mut lines = Vec::with_capacity(n as usize);
    for i in 0..n {
        let s = seed.wrapping_add(i);
        let b = sample_index(probs, s);
        counts[b] += 1;
        lines.push(serde_json::json!({ "seed": s, "branch": b, "p": probs[b] }).to_string());
    }
    let (worst_z, _) = born_counts_check(&counts, probs, n);
    let report = EnsembleReport {
        n_runs: n,
        first_seed: seed,
        probabilities: probs.to_vec(),
        frequencies: counts.iter().map(|&k| k as f64 / n as f64).collect(),
        counts,
        worst_z,
    };
    (report, lines)
}

fn born_assertion(r: &EnsembleReport) -> Assertion {
    Assertion::new("born_frequencies", r.worst_z <= 3.0, format!("worst |z| = {:.3} <= 3", r.worst_z))
}

fn run_born_ensemble(cfg: &ScenarioConfig, ctx: &mut RunContext) -> Result<()> {
    let seed = cfg.seed.ok_or_else(|| Error::Validation("seed required".into()))?;
    let n = cfg.n_runs().unwrap_or(1);
    let decomp = build_decomposition(cfg)?;
    decomp.check_weak_interference()?;
    let geo = geometric_probabilities(&decomp)?;
    let (report, lines) = run_ensemble(&geo.probabilities, seed, n);
    ctx.check(Assertion::within(
        "geometric_probabilities",
        max_abs_diff(&geo.probabilities, &branch_weights(cfg)),
        1e-8,
    ));
    ctx.check(born_assertion(&report));
    ctx.write_lines(COLLAPSE_FILE, lines)?;
    ctx.write_json(SUMMARY_FILE, &report)?;
    Ok(())
}

/// Weighted mixture of branch summaries, used for single-line timeseries rows.
fn mixture_summary(summaries: &[PacketSummary], weights: &[f64]) -> PacketSummary {
    let mean = |f: fn(&PacketSummary) -> f64| summaries.iter().zip(weights).map(|(s, w)| w * f(s)).sum::<f64>();
    let exp_x = mean(|s| s.exp_x);
    let exp_p = mean(|s| s.exp_p);
    let var_x: f64 =
        summaries.iter().zip(weights).map(|(s, w)| w * (s.std_x * s.std_x + (s.exp_x - exp_x).powi(2))).sum();
    let var_p: f64 =
        summaries.iter().zip(weights).map(|(s, w)| w * (s.std_p * s.std_p + (s.exp_p - exp_p).powi(2))).sum();
    let lo = summaries.iter().map(|s| s.support.0).fold(f64::INFINITY, f64::min);
    let hi = summaries.iter().map(|s| s.support.1).fold(f64::NEG_INFINITY, f64::max);
    let mass = mean(|s| s.mass_in_support);
    PacketSummary { exp_x, std_x: var_x.sqrt(), exp_p, std_p: var_p.sqrt(), support: (lo, hi), mass_in_support: mass }
}

#[derive(Serialize)]
struct MeasurementReport {
    object_dim: usize,
    coefficients: Vec<num_complex::Complex64>,
    t_star: Option<f64>,
    critical_value: Option<f64>,
    outcome_branch: Option<usize>,
    seed: u64,
    probabilities: Vec<f64>,
    ensemble: Option<EnsembleReport>,
}

fn run_measurement(cfg: &ScenarioConfig, ctx: &mut RunContext) -> Result<()> {
    let seed = cfg.seed.ok_or_else(|| Error::Validation("seed required".into()))?;
    let params = cfg.physics;
    let gate = cfg.gate;
    let coupling = cfg.coupling();
    let ready = cfg.initial_packet()?;
    let ready_summary = packet_summary(&ready, &gate, &params)?;
    let pointer = [ObservableSpec::shifted_position(pointer_offset(&ready_summary, &gate))];
    let object = ObjectState::new(cfg.coefficients.clone())?;
    let start = premeasurement(&object, &ready, &pointer, &gate, &params)?;
    let weights: Vec<f64> = start.branches().iter().map(|b| b.coefficient.norm_sqr()).collect();

    let ev = cfg.evolution;
    let mut rows = Vec::new();
    let mut worst_norm = 0.0f64;
    let mut count = 0usize;
    let (end, report) =
        von_neumann_evolve_observed(&start, &coupling, &cfg.potential, &params, ev.dt, &gate, |s| {
            worst_norm = worst_norm.max((s.norm_sqr - 1.0).abs());
            if count % ev.record_every == 0 {
                rows.push(TimeseriesRow {
                    t: s.t,
                    norm: s.norm_sqr.sqrt(),
                    summary: mixture_summary(&s.summaries, &weights),
                    order: s.order.map(|o| (o.min_separation, o.critical_value)),
                });
            }
            count += 1;
        })?;
    ctx.write_timeseries(&rows)?;

    let crossing = report.transition_sample().copied();
    ctx.check(Assertion::new(
        "transition_reached",
        report.critical_time.is_some(),
        format!("t* = {:?}", report.critical_time),
    ));
    ctx.check(Assertion::within("norm_conserved", worst_norm, 1e-8));
    if end.branches().len() >= 2 {
        let m = pointer_distinguishability(&end)?;
        let worst = (0..m.len())
            .flat_map(|i| (0..m.len()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j])
            .fold(0.0, f64::max);
        ctx.check(Assertion::within("pointer_overlap", worst, 1e-6));
    }

    let mut report_out = MeasurementReport {
        object_dim: object.dim(),
        coefficients: cfg.coefficients.clone(),
        t_star: report.critical_time,
        critical_value: crossing.map(|c| c.critical_value),
        outcome_branch: None,
        seed,
        probabilities: Vec::new(),
        ensemble: None,
    };

    if report.critical_time.is_some() {
        let prepared = PreparedMeasurement::new(&end, &report, &gate, &params)?;
        let outcome = prepared.measure(seed)?;
        let object_err = max_abs_diff(&outcome.object_mixture, &object.weights());
        ctx.check(Assertion::within("object_mixture", object_err, 1e-12));
        ctx.write_snapshot("snapshot_apparatus.csv", &outcome.apparatus_state)?;
        report_out.outcome_branch = Some(outcome.realized_object_index);
        report_out.probabilities = prepared.probabilities().to_vec();

        let mut lines = vec![outcome.event.to_json_line()];
        if let Some(n) = cfg.n_runs() {
            let mut counts = vec![0u64; object.dim()];
            lines.clear();
            for i in 0..n {
                let s = seed.wrapping_add(i);
                let idx = prepared.sample_object_index(s);
                counts[idx] += 1;
                lines.push(serde_json::json!({ "seed": s, "branch": idx }).to_string());
            }
            let probs = object.weights();
            let (worst_z, _) = born_counts_check(&counts, &probs, n);
            let ensemble = EnsembleReport {
                n_runs: n,
                first_seed: seed,
                frequencies: counts.iter().map(|&k| k as f64 / n as f64).collect(),
                probabilities: probs,
                counts,
                worst_z,
            };
            ctx.check(born_assertion(&ensemble));
            report_out.ensemble = Some(ensemble);
        }
        ctx.write_lines(COLLAPSE_FILE, lines)?;
    }
    ctx.write_json(SUMMARY_FILE, &report_out)?;
    Ok(())
}

/// Small built-in configs exercising every scenario; used by `check`.
pub fn builtin_configs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("free_spread", "scenario = \"free_spread\"\n[evolution]\ndt = 0.01\nn_steps = 200\nrecord_every = 10\n"),
        (
            "harmonic_coherent",
            "scenario = \"harmonic_coherent\"\n[packet]\ncenter = 3.0\nsigma = 0.7071067811865476\n\
             [potential]\nkind = \"harmonic\"\nomega = 1.0\ncenter = 0.0\n\
             [grid]\nx_min = -20.0\nx_max = 20.0\nn_points = 1024\n\
             [evolution]\ndt = 0.001\nn_steps = 1000\nrecord_every = 50\n",
        ),
        ("cat_gate", "scenario = \"cat_gate\"\ncoefficients = [0.6, 0.8]\n[packet]\ncenter = -10.0\n"),
        ("collapse_sample", "scenario = \"collapse_sample\"\nseed = 42\n[packet]\ncenter = -10.0\n"),
        (
            "born_ensemble",
            "scenario = \"born_ensemble\"\nseed = 1\ncoefficients = [0.5, 0.5, 0.5, 0.5]\n\
             [packet]\ncenter = -30.0\nsigma = 1.0\nseparation = 20.0\n[ensemble]\nn_runs = 20000\n",
        ),
        (
            "measurement_run",
            "scenario = \"measurement_run\"\nseed = 7\n[physics]\nmass = 100.0\n\
             [grid]\nx_min = -20.0\nx_max = 40.0\nn_points = 1024\n[gate]\nk = 6.0\n\
             [evolution]\ndt = 0.01\nn_steps = 1200\nrecord_every = 10\n",
        ),
    ]
}
