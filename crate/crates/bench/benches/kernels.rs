use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use grwp_bench::canonical;
use grwp_core::bohm::{Guidance, GuidanceScratch};
use grwp_core::fft::FftScratch;
use grwp_core::schrodinger::{build_gaussian_packet, PropagatorPlan};
use grwp_core::trajectory::RunContext;
use grwp_core::Mode;

fn propagator(c: &mut Criterion) {
    let config = canonical(Mode::Grwp, 1.0);
    let psi = build_gaussian_packet(&config.grid, &[0.0], &[1.0], &[1.0]).unwrap();
    let plan = PropagatorPlan::new(config.grid.clone(), &config.params, config.run.dt).unwrap();
    let mut amps = psi.amplitudes().to_vec();
    let mut scratch = FftScratch::default();
    c.bench_function("split_step_512", |b| {
        b.iter(|| plan.step_in_place(&mut amps, None, &mut scratch).unwrap())
    });
}

fn velocity_field(c: &mut Criterion) {
    let config = canonical(Mode::Grwp, 1.0);
    let psi = build_gaussian_packet(&config.grid, &[0.0], &[1.0], &[1.0]).unwrap();
    let guidance = Guidance::new(config.grid.clone(), &config.params);
    let mut scratch = GuidanceScratch::default();
    c.bench_function("velocity_field_512", |b| {
        b.iter(|| guidance.field(psi.amplitudes(), 0.0, &mut scratch))
    });
}

fn trajectory(c: &mut Criterion) {
    let mut group = c.benchmark_group("trajectory_t0.5");
    group.sample_size(20);
    for mode in [Mode::Grwp, Mode::Grw, Mode::BohmOnly] {
        let ctx = RunContext::new(&canonical(mode, 0.5)).unwrap();
        let mut seed = 0u64;
        group.bench_function(mode.as_str(), |b| {
            b.iter_batched(
                || {
                    seed += 1;
                    seed
                },
                |s| ctx.run(s as usize, s),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, propagator, velocity_field, trajectory);
criterion_main!(benches);
