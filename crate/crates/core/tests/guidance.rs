use std::sync::Arc;

use grwp_core::bohm::{integrate_path, Guide};
use grwp_core::sampling::sample_initial_configuration;
use grwp_core::schrodinger::{build_gaussian_packet, FreeGaussian};
use grwp_core::seed::trajectory_rng;
use grwp_core::{canonical_raw, run_trajectory, validate_config, Configuration, Grid, Mode, PhysicalParams};

fn free_path_end(dt: f64, t: f64, q0: f64) -> f64 {
    let grid = Arc::new(Grid::line(-20.0, 20.0, 512).unwrap());
    let params = PhysicalParams::standard(1);
    let guide = Guide::new(grid.clone(), &params, dt).unwrap();
    let psi0 = build_gaussian_packet(&grid, &[0.0], &[1.0], &[0.0]).unwrap();
    let steps = (t / dt).round() as usize;
    let path = integrate_path(&guide, &psi0, &Configuration::new(vec![q0], 1, 0.0), steps).unwrap();
    path.last().unwrap().positions[0]
}

#[test]
fn free_gaussian_scale_flow() {
    let q = free_path_end(0.005, 2.0, 1.0);
    assert!((q - 2f64.sqrt()).abs() < 5e-4, "Q(2) = {q}");
    let packet = FreeGaussian { mean: 0.0, s0: 1.0, k: 0.0, mass: 1.0, hbar: 1.0 };
    assert!((packet.bohm_path(1.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn midpoint_rule_is_at_least_second_order() {
    // A displaced start makes the path sensitive to the field's time
    // dependence; the reference uses a sixteenth of the coarsest step.
    // Steps stay below the clamp threshold. The free field is linear in
    // x, where the error drops faster than h^2.
    let (t, q0) = (2.0, 1.5);
    let reference = free_path_end(0.02 / 16.0, t, q0);
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| (free_path_end(dt, t, q0) - reference).abs())
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio >= 3.5, "errors {errors:?}");
    }
}

#[test]
fn bohm_only_trajectory_matches_pure_integration_bitwise() {
    let mut raw = canonical_raw();
    raw.run.snapshot_times = Some(vec![]);
    let config = validate_config(&raw).unwrap().with_mode(Mode::BohmOnly);
    let seed = 99;
    let rec = run_trajectory(&config, seed).unwrap();
    assert!(rec.events.is_empty());

    let psi0 = build_gaussian_packet(&config.grid, &[0.0], &[1.0], &[0.0]).unwrap();
    let q0 = sample_initial_configuration(&psi0, &mut trajectory_rng(seed)).unwrap();
    let guide = Guide::new(config.grid.clone(), &config.params, config.run.dt).unwrap();
    let steps = (config.run.t_final / config.run.dt).round() as usize;
    let path = integrate_path(&guide, &psi0, &q0, steps).unwrap();
    let a = &rec.final_configuration.positions;
    let b = &path.last().unwrap().positions;
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
