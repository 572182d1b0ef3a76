use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use drfsim::config::Protocol;
use drfsim::{simulate, EventQueue, RngStream, RunOptions, ScenarioConfig, SimTime};

fn event_queue(c: &mut Criterion) {
    let mut rng = RngStream::new(1, "bench");
    let times: Vec<u64> = (0..10_000).map(|_| rng.below(1_000_000)).collect();
    c.bench_function("event_queue/schedule_pop_10k", |b| {
        b.iter_batched(
            EventQueue::<u32>::new,
            |mut q| {
                for (i, &t) in times.iter().enumerate() {
                    q.schedule(SimTime(t), i as u32);
                }
                while let Some(ev) = q.pop_until(SimTime(u64::MAX)) {
                    black_box(ev);
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn scenario(protocol: Protocol, flows: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scenario.protocol = protocol;
    cfg.scenario.flows = flows;
    cfg.scenario.speed = 20.0;
    cfg.scenario.duration = 10.0;
    cfg
}

fn short_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_10s");
    group.sample_size(10);
    for protocol in [Protocol::Atp, Protocol::Drf] {
        for flows in [1, 5] {
            let cfg = scenario(protocol, flows);
            group.bench_with_input(BenchmarkId::new(protocol.as_str(), flows), &cfg, |b, cfg| {
                b.iter(|| simulate(cfg, RunOptions::default()).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, event_queue, short_runs);
criterion_main!(benches);
