use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nvsc_core::config::ScenarioConfig;
use nvsc_core::engine::run_scenario;
use nvsc_core::parallel;

/// Short attack-free runs over several neuron counts.
fn jobs() -> Vec<ScenarioConfig> {
    [5, 10, 15, 20]
        .iter()
        .map(|&m| {
            let mut c = ScenarioConfig::platoon_default();
            c.horizon = 0.25;
            c.neural.neurons = m;
            c
        })
        .collect()
}

fn sweep(c: &mut Criterion) {
    let jobs = jobs();
    let mut g = c.benchmark_group("neuron_sweep");
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("sequential", jobs.len()), &jobs, |b, jobs| {
        b.iter(|| parallel::map_seq(jobs, |c| run_scenario(c).map(|t| t.rows.len())))
    });
    g.bench_with_input(BenchmarkId::new(parallel::backend(), jobs.len()), &jobs, |b, jobs| {
        b.iter(|| parallel::map(jobs, |c| run_scenario(c).map(|t| t.rows.len())))
    });
    g.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
