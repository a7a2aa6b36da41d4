use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dcsim_bench::ring;

fn event_throughput(c: &mut Criterion) {
    let mut group = c.benchmark_group("dispatch");
    for tokens in [1u32, 64, 4096] {
        let hops = 100_000 / tokens as u64;
        group.throughput(Throughput::Elements(tokens as u64 * (hops + 1)));
        group.bench_with_input(
            BenchmarkId::from_parameter(tokens),
            &tokens,
            |b, &tokens| b.iter(|| ring(16, tokens, hops).run().unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, event_throughput);
criterion_main!(benches);
