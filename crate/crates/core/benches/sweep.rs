use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use vibronic::par::Execution;
use vibronic::scenarios::{config::parse_config, sweep};

fn grids(c: &mut Criterion) {
    let closed = parse_config(
        "[system]\ngamma0 = 1\n[run.sweep]\ndelta = { from = -5, to = 5, steps = 41 }\ng0 = [0.25, 0.5, 1, 2, 4]\nm = [0, 1, 2, 3, 4, 5, 6, 7]\n",
    )
    .unwrap();
    let lindblad = parse_config(
        "[system]\ngamma0 = 1\n[run.sweep]\ndelta = { from = -3, to = 3, steps = 7 }\ng0 = [0.5, 1]\nm = [0, 3]\nlindblad = true\n",
    )
    .unwrap();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, cfg) in [("closed_form", &closed), ("lindblad", &lindblad)] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(name, format!("{exec:?}")), cfg, |b, cfg| {
                b.iter(|| black_box(sweep(cfg, exec).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, grids);
criterion_main!(benches);
