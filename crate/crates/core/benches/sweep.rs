use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use spinforge::dj::{exhaustive_sweep, DEFAULT_THRESHOLD};
use spinforge::par::Execution;
use spinforge::SpinSystem;

fn sweep(c: &mut Criterion) {
    let system = SpinSystem::glycine_fluoride();
    let mut group = c.benchmark_group("exhaustive_sweep");
    group.sample_size(10);
    for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        group.bench_function(name, |b| {
            b.iter(|| exhaustive_sweep(black_box(&system), DEFAULT_THRESHOLD, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
