use std::f64::consts::PI;
use std::sync::Arc;

use grwp_core::schrodinger::{analytic_free_gaussian, build_gaussian_packet, CoherentState, FreeGaussian, PropagatorPlan};
use grwp_core::{Grid, PhysicalParams, Potential, WaveFunction};
use num_complex::Complex64;
use proptest::prelude::*;

fn canonical_line() -> Arc<Grid> {
    Arc::new(Grid::line(-20.0, 20.0, 512).unwrap())
}

fn harmonic() -> PhysicalParams {
    let mut p = PhysicalParams::standard(1);
    p.potential = Potential::Harmonic { omega: vec![1.0] };
    p
}

fn evolve(plan: &PropagatorPlan, mut psi: WaveFunction, steps: usize) -> WaveFunction {
    for _ in 0..steps {
        psi = plan.step(&psi, None).unwrap();
    }
    psi
}

#[test]
fn free_gaussian_matches_analytic_solution() {
    let grid = canonical_line();
    let packet = FreeGaussian { mean: 0.0, s0: 1.0, k: 2.0, mass: 1.0, hbar: 1.0 };
    let plan = PropagatorPlan::new(grid.clone(), &PhysicalParams::standard(1), 0.005).unwrap();
    let psi = evolve(&plan, analytic_free_gaussian(&grid, &[packet], 0.0).unwrap(), 200);
    let err = psi.distance(&analytic_free_gaussian(&grid, &[packet], 1.0).unwrap());
    assert!(err < 1e-6, "L2 error {err:e}");
}

#[test]
fn coherent_state_returns_after_one_period() {
    let grid = canonical_line();
    let cs = CoherentState { omega: 1.0, mass: 1.0, hbar: 1.0, x0: 2.0, p0: 0.0 };
    let steps = (2.0 * PI / 0.001).ceil() as usize;
    let plan = PropagatorPlan::new(grid.clone(), &harmonic(), 2.0 * PI / steps as f64).unwrap();
    let psi0 = cs.on_grid(&grid, 0.0).unwrap();
    let psi = evolve(&plan, psi0.clone(), steps);
    let overlap = psi.inner(&psi0).norm();
    assert!(overlap > 1.0 - 1e-5, "overlap {overlap}");
}

#[test]
fn norm_drift_over_ten_thousand_steps() {
    let grid = canonical_line();
    for params in [PhysicalParams::standard(1), harmonic()] {
        let plan = PropagatorPlan::new(grid.clone(), &params, 0.005).unwrap();
        let mut psi = build_gaussian_packet(&grid, &[1.0], &[1.0], &[1.5]).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let before = psi.norm();
            psi = plan.step(&psi, None).unwrap();
            assert!((psi.norm() - before).abs() < 1e-12);
            worst = worst.max((psi.norm_sq() - 1.0).abs());
        }
        assert!(worst < 1e-10, "drift {worst:e}");
    }
}

#[test]
fn strang_splitting_is_second_order() {
    let grid = canonical_line();
    let cs = CoherentState { omega: 1.0, mass: 1.0, hbar: 1.0, x0: 2.0, p0: 1.0 };
    let t = 1.0;
    let exact = cs.on_grid(&grid, t).unwrap();
    let errors: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            let steps = (t / dt).round() as usize;
            let plan = PropagatorPlan::new(grid.clone(), &harmonic(), dt).unwrap();
            evolve(&plan, cs.on_grid(&grid, 0.0).unwrap(), steps).distance(&exact)
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn partial_steps_compose() {
    let grid = canonical_line();
    let plan = PropagatorPlan::new(grid.clone(), &PhysicalParams::standard(1), 0.01).unwrap();
    let psi = build_gaussian_packet(&grid, &[0.0], &[1.0], &[1.0]).unwrap();
    let whole = plan.step(&psi, None).unwrap();
    let split = plan.step(&plan.step(&psi, Some(0.004)).unwrap(), Some(0.006)).unwrap();
    assert!(whole.distance(&split) < 1e-12);
}

#[test]
fn rejects_bad_override() {
    let grid = canonical_line();
    let plan = PropagatorPlan::new(grid.clone(), &PhysicalParams::standard(1), 0.01).unwrap();
    let psi = build_gaussian_packet(&grid, &[0.0], &[1.0], &[0.0]).unwrap();
    assert!(plan.step(&psi, Some(-1.0)).is_err());
    assert!(plan.step(&psi, Some(f64::NAN)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_is_linear(ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0,
                      m1 in -3.0f64..3.0, m2 in -3.0f64..3.0, k in -2.0f64..2.0) {
        let grid = Arc::new(Grid::line(-20.0, 20.0, 128).unwrap());
        let plan = PropagatorPlan::new(grid.clone(), &harmonic(), 0.01).unwrap();
        let p1 = build_gaussian_packet(&grid, &[m1], &[1.0], &[k]).unwrap();
        let p2 = build_gaussian_packet(&grid, &[m2], &[1.5], &[-k]).unwrap();
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let mix: Vec<Complex64> = p1.amplitudes().iter().zip(p2.amplitudes()).map(|(x, y)| a * x + b * y).collect();
        let mut lhs = mix.clone();
        let mut scratch = Default::default();
        plan.step_in_place(&mut lhs, None, &mut scratch).unwrap();
        let s1 = plan.step(&p1, None).unwrap();
        let s2 = plan.step(&p2, None).unwrap();
        for (j, z) in lhs.iter().enumerate() {
            let rhs = a * s1.amplitudes()[j] + b * s2.amplitudes()[j];
            prop_assert!((z - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_is_preserved_for_random_packets(mean in -5.0f64..5.0, width in 0.5f64..2.0, k in -3.0f64..3.0,
                                            h in 1e-4f64..0.05) {
        let grid = Arc::new(Grid::line(-20.0, 20.0, 256).unwrap());
        let plan = PropagatorPlan::new(grid.clone(), &harmonic(), 0.01).unwrap();
        let psi = build_gaussian_packet(&grid, &[mean], &[width], &[k]).unwrap();
        let out = plan.step(&psi, Some(h)).unwrap();
        prop_assert!((out.norm() - psi.norm()).abs() < 1e-12);
    }
}
