use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mesorate::config::GridSpec;
use mesorate::exec::Execution;
use mesorate::experiments::{
    fig3_default_energies, fig3_default_grid, fig3_default_rates, run_fermi_sweep_with,
    run_sweep_with, SweepSpec, GAMMA_RATIO,
};
use mesorate::model::Scenario;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    m.push(("parallel", Execution::Parallel));
    m
}

fn gamma_ratio_sweep(c: &mut Criterion) {
    let spec = SweepSpec {
        scenario: Scenario::DoubleDotSet,
        base: fig3_default_rates(),
        parameter: GAMMA_RATIO.into(),
        grid: GridSpec {
            start: 1.0,
            stop: 1e4,
            count: 512,
            log: true,
        }
        .values(),
    };
    let mut group = c.benchmark_group("gamma_ratio_sweep_512");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_sweep_with(black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

fn fermi_sweep(c: &mut Criterion) {
    let r = fig3_default_rates();
    let e = fig3_default_energies();
    let grid = fig3_default_grid(&e, &r, 512);
    let mut group = c.benchmark_group("fermi_sweep_512");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_fermi_sweep_with(black_box(&r), &e, &grid, false, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gamma_ratio_sweep, fermi_sweep);
criterion_main!(benches);
