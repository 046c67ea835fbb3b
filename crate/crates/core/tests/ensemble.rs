use grwp_core::config::{InitialSampling, RawInitial};
use grwp_core::ensemble::{run_ensemble, run_ensemble_unchecked};
use grwp_core::records::{event_log_string, read_event_log};
use grwp_core::verify::{center_equivalence_from, collapse_rate_from, equivariance_from, flash_proximity_from};
use grwp_core::{canonical_raw, run_trajectory, validate_config, Error, Mode, RawConfig, SimConfig};
use proptest::prelude::*;

/// Canonical physics on a coarser grid and step.
fn fast_raw(n: usize) -> RawConfig {
    let mut raw = canonical_raw();
    raw.grid.points = Some(vec![256]);
    raw.run.dt = Some(0.01);
    raw.run.ensemble_n = Some(n);
    raw
}

fn fast(n: usize, mode: Mode) -> SimConfig {
    validate_config(&fast_raw(n)).unwrap().with_mode(mode)
}

/// Wide collapses on a coarse grid: only the scheduler matters.
fn scheduler_config(n: usize, lambda: f64, t_final: f64) -> SimConfig {
    let mut raw = canonical_raw();
    raw.physics.lambda = Some(lambda);
    raw.physics.sigma = Some(2.0);
    raw.grid.domain = Some(vec![[-32.0, 32.0]]);
    raw.grid.points = Some(vec![128]);
    raw.run.dt = Some(0.05);
    raw.run.t_final = Some(t_final);
    raw.run.ensemble_n = Some(n);
    raw.run.snapshot_times = Some(vec![]);
    validate_config(&raw).unwrap()
}

#[test]
fn reruns_and_worker_counts_give_identical_results() {
    let config = fast(4, Mode::Grwp);
    let a = run_ensemble_unchecked(&config, Some(1)).unwrap();
    let b = run_ensemble_unchecked(&config, Some(1)).unwrap();
    let c = run_ensemble_unchecked(&config, Some(4)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(event_log_string(&a), event_log_string(&c));
    assert!(a.manifest.events > 0);
}

#[test]
fn trajectory_seeds_are_independent_of_ensemble_size() {
    let small = run_ensemble(&fast(3, Mode::Grw)).unwrap();
    let large = run_ensemble(&fast(6, Mode::Grw)).unwrap();
    assert_eq!(small.records[..], large.records[..3]);
}

#[test]
fn event_stream_invariants() {
    let ens = run_ensemble(&fast(30, Mode::Grwp)).unwrap();
    for r in &ens.records {
        assert!(r.events.windows(2).all(|w| w[0].time < w[1].time));
        for (k, (e, q)) in r.events.iter().zip(&r.collapse_positions).enumerate() {
            assert_eq!(e.k, k + 1);
            assert!(e.c > 0.0 && e.c.is_finite());
            assert_eq!(e.center[0].to_bits(), (q[e.particle] + e.offset[0]).to_bits());
        }
        assert!(r.snapshots.windows(2).all(|w| w[0].time < w[1].time));
    }
    let parsed = read_event_log(event_log_string(&ens).as_bytes()).unwrap();
    assert_eq!(parsed.len(), ens.manifest.events);
    assert!(parsed.iter().all(|e| e.i == 1 && e.mode == Mode::Grwp));
}

#[test]
fn pinned_events_have_zero_offset_and_center_at_position() {
    let config = fast(30, Mode::Pinned);
    let ens = run_ensemble(&config).unwrap();
    assert!(ens.manifest.events > 0);
    for r in &ens.records {
        for (e, q) in r.events.iter().zip(&r.collapse_positions) {
            assert!(e.offset.iter().all(|z| z.to_bits() == 0));
            assert_eq!(e.center[0].to_bits(), q[e.particle].to_bits());
        }
    }
    let report = flash_proximity_from(&config, &ens).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.results[0].statistic, 0.0);
}

#[test]
fn mean_event_count_is_poisson() {
    let ens = run_ensemble(&scheduler_config(10_000, 1.0, 5.0)).unwrap();
    let n = ens.records.len() as f64;
    let mean = ens.manifest.events as f64 / n;
    assert!((mean - 5.0).abs() < 3.0 * (5.0 / n).sqrt(), "mean count {mean}");
}

#[test]
fn waiting_time_mean_scales_with_rate() {
    let slow_cfg = scheduler_config(2000, 1.0, 2.0);
    let fast_cfg = scheduler_config(2000, 2.0, 2.0);
    let slow = collapse_rate_from(&slow_cfg, &run_ensemble(&slow_cfg).unwrap()).unwrap();
    let quick = collapse_rate_from(&fast_cfg, &run_ensemble(&fast_cfg).unwrap()).unwrap();
    assert!(slow.passed(), "{slow}");
    assert!(quick.passed(), "{quick}");
    let w1 = slow.get("rate.waiting_times").unwrap();
    let w2 = quick.get("rate.waiting_times").unwrap();
    let (m1, s1) = (w1.aux("mean").unwrap(), w1.aux("se").unwrap());
    let (m2, s2) = (w2.aux("mean").unwrap(), w2.aux("se").unwrap());
    assert!((m1 - 1.0).abs() < 3.0 * s1);
    assert!((m2 - 0.5).abs() < 3.0 * s2);
    assert!((m1 / 2.0 - m2).abs() < 3.0 * (s1 * s1 / 4.0 + s2 * s2).sqrt());
}

#[test]
fn grw_against_grw_with_another_seed_passes() {
    let a_cfg = fast(1500, Mode::Grw);
    let mut b_cfg = a_cfg.clone();
    b_cfg.run.master_seed += 1;
    let a = run_ensemble(&a_cfg).unwrap();
    let b = run_ensemble(&b_cfg).unwrap();
    let report = center_equivalence_from(&a, &b, None, 1).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.results.len(), 2);
}

#[test]
fn equivariance_at_time_zero_and_uniform_control() {
    let mut raw = fast_raw(2000);
    raw.run.snapshot_times = Some(vec![0.0, 0.5]);
    let config = validate_config(&raw).unwrap().with_mode(Mode::BohmOnly);
    let report = equivariance_from(&config, &run_ensemble(&config).unwrap()).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.results.len(), 2);

    let mut control = config.clone();
    control.initial.sampling = InitialSampling::Uniform;
    let report = equivariance_from(&control, &run_ensemble(&control).unwrap()).unwrap();
    assert!(report.results.iter().all(|r| !r.pass && r.statistic > 0.2), "{report}");
}

#[test]
fn abort_rate_breach_is_an_error() {
    let mut raw = fast_raw(10);
    raw.grid.domain = Some(vec![[-7.0, 7.0]]);
    raw.grid.points = Some(vec![128]);
    raw.initial = Some(RawInitial { mean: Some(vec![0.0]), width: Some(vec![1.0]), momentum: Some(vec![4.0]), sampling: None });
    let config = validate_config(&raw).unwrap().with_mode(Mode::BohmOnly);
    match run_ensemble(&config) {
        Err(Error::AbortRate { aborted, total, .. }) => assert_eq!((aborted, total), (10, 10)),
        other => panic!("expected abort-rate error, got {other:?}"),
    }
    let ens = run_ensemble_unchecked(&config, None).unwrap();
    assert!(ens.manifest.abort_examples[0].1.contains("boundary mass"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trajectories_are_deterministic_in_seed(seed in any::<u64>(), mode in 0usize..3) {
        let mut raw = fast_raw(1);
        raw.run.t_final = Some(0.6);
        raw.run.snapshot_times = Some(vec![0.3]);
        let config = validate_config(&raw).unwrap().with_mode([Mode::Grw, Mode::Grwp, Mode::Pinned][mode]);
        let a = run_trajectory(&config, seed).unwrap();
        let b = run_trajectory(&config, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
