use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vislineup::parallel::ExecutionMode;
use vislineup::power::{mc_power, nonlinear_grid, McConfig};
use vislineup::simulate::PredictorDist;

fn bench_modes(c: &mut Criterion) {
    let cells = nonlinear_grid(&[PredictorDist::Uniform]);
    let mut group = c.benchmark_group("mc_power");
    group.sample_size(10);
    for (name, mode) in [("sequential", ExecutionMode::Sequential), ("parallel", ExecutionMode::Parallel)] {
        let mut cfg = McConfig::new(20, 1);
        cfg.mode = mode;
        group.bench_with_input(BenchmarkId::new(name, cells.len() * cfg.nsim), &cfg, |b, cfg| {
            b.iter(|| mc_power(&cells, cfg).unwrap().records.len())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_modes);
criterion_main!(benches);
