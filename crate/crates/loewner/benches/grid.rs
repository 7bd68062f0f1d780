//! Hitting times over a grid of start points: rayon path against the
//! sequential one. With `--no-default-features` both rows run sequentially.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use loewner::driver::random_piecewise_linear;
use loewner::flow::Flow;
use loewner::{par, StepPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hitting_grid(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = random_piecewise_linear(&mut rng, 1.0, 9, 0.0, 0.6).unwrap();
    let policy = StepPolicy::default();
    let flow = Flow::new(&d, &policy).unwrap();
    let mut group = c.benchmark_group("hitting_grid");
    group.sample_size(10);
    for n in [64usize, 256] {
        let xs: Vec<f64> = (0..n).map(|i| -2.5 + 5.0 * (i as f64 + 0.5) / n as f64).collect();
        let label = if par::is_parallel() { "rayon" } else { "fallback" };
        group.bench_with_input(BenchmarkId::new(label, n), &xs, |b, xs| {
            b.iter(|| par::map(xs, |&x| black_box(flow.hitting_time(x).unwrap())))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &xs, |b, xs| {
            b.iter(|| par::map_seq(xs, |&x| black_box(flow.hitting_time(x).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, hitting_grid);
criterion_main!(benches);
