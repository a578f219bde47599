mod common;

use packet_collapse::propagator::{evolve, EvolutionConfig, Potential, Propagator};
use packet_collapse::{inner_product, make_gaussian, superpose, Complex64, Error, Grid1D, PhysicalParams};

const UNIT: PhysicalParams = PhysicalParams { mass: 1.0, hbar: 1.0 };

#[test]
fn one_step_matches_dense_exponential() {
    let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
    let psi = make_gaussian(&grid, -0.5, 1.0, 1.0, &UNIT).unwrap();
    for v in [
        Potential::Free,
        Potential::Harmonic { omega: 1.5, center: 0.5 },
        Potential::DoubleWell { barrier_height: 0.5, well_separation: 3.0 },
    ] {
        for dt in [0.01, 0.002] {
            let dense = common::dense_propagator(&grid, &v, &UNIT, dt);
            let exact = common::apply(&dense, psi.amplitudes());
            let split = Propagator::new(&grid, &v, &UNIT, dt).unwrap().step(&psi).unwrap();
            let d = common::l2_distance(&exact, split.amplitudes(), grid.dx());
            assert!(d <= 1e-6, "{v:?} dt {dt}: {d:e}");
        }
    }
}

#[test]
fn free_step_is_exact_against_dense() {
    // kinetic-only split has no splitting error
    let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
    let psi = make_gaussian(&grid, 0.0, 1.0, 0.5, &UNIT).unwrap();
    let dense = common::dense_propagator(&grid, &Potential::Free, &UNIT, 0.05);
    let exact = common::apply(&dense, psi.amplitudes());
    let split = Propagator::new(&grid, &Potential::Free, &UNIT, 0.05).unwrap().step(&psi).unwrap();
    assert!(common::l2_distance(&exact, split.amplitudes(), grid.dx()) <= 1e-11);
}

#[test]
fn forward_then_backward_returns_the_state() {
    let grid = Grid1D::new(-40.0, 40.0, 1024).unwrap();
    let v = Potential::Harmonic { omega: 1.0, center: 0.0 };
    let psi = make_gaussian(&grid, 2.0, 1.0, 0.5, &UNIT).unwrap();
    let fwd = Propagator::new(&grid, &v, &UNIT, 0.01).unwrap();
    let back = Propagator::new(&grid, &v, &UNIT, -0.01).unwrap();
    let mut cur = psi.clone();
    for _ in 0..500 {
        cur = fwd.step(&cur).unwrap();
    }
    for _ in 0..500 {
        cur = back.step(&cur).unwrap();
    }
    let d = common::l2_distance(cur.amplitudes(), psi.amplitudes(), grid.dx());
    assert!(d <= 1e-8, "{d:e}");
}

#[test]
fn co_evolved_coefficients_stay_constant() {
    let grid = Grid1D::new(-40.0, 40.0, 1024).unwrap();
    let v = Potential::DoubleWell { barrier_height: 1.0, well_separation: 20.0 };
    let parts: Vec<_> = [-10.0, 10.0].iter().map(|&x| make_gaussian(&grid, x, 1.0, 0.0, &UNIT).unwrap()).collect();
    let c = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
    let psi = superpose(&c.iter().copied().zip(parts.clone()).collect::<Vec<_>>()).unwrap();
    let cfg = EvolutionConfig { dt: 0.01, n_steps: 300, record_every: 300 };
    let end = evolve(&psi, &v, &UNIT, &cfg, |_, _| {}).unwrap();
    for (cn, p) in c.iter().zip(&parts) {
        let p_end = evolve(p, &v, &UNIT, &cfg, |_, _| {}).unwrap();
        assert!((inner_product(&p_end, &end).unwrap().norm() - cn.norm()).abs() <= 1e-7);
    }
}

#[test]
fn observer_cadence() {
    let grid = Grid1D::new(-20.0, 20.0, 256).unwrap();
    let psi = make_gaussian(&grid, 0.0, 1.0, 0.0, &UNIT).unwrap();
    let cfg = EvolutionConfig { dt: 0.01, n_steps: 10, record_every: 5 };
    let mut times = Vec::new();
    evolve(&psi, &Potential::Free, &UNIT, &cfg, |t, _| times.push(t)).unwrap();
    assert_eq!(times.len(), 3);
    assert!((times[2] - 0.1).abs() < 1e-12);
}

#[test]
fn oversized_step_is_rejected() {
    let grid = Grid1D::new(-20.0, 20.0, 256).unwrap();
    let v = Potential::Harmonic { omega: 10.0, center: 0.0 };
    assert!(matches!(Propagator::new(&grid, &v, &UNIT, 0.1), Err(Error::InvalidTimeStep(_))));
}
