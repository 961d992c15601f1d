use criterion::{criterion_group, criterion_main, Criterion};
use gridroute_bench::grid_scenario;
use gridroute_core::clustering::kmeans;
use gridroute_core::engine::{Mode, World};
use gridroute_core::geom::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clustering(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Point> = (0..500)
        .map(|_| Point::new(rng.random_range(0.0..1500.0), rng.random_range(0.0..1500.0)))
        .collect();
    c.bench_function("kmeans_500_points_k25", |b| {
        b.iter(|| kmeans(&points, 25, &mut ChaCha8Rng::seed_from_u64(1)).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let scenario = grid_scenario(5, 100, 1);
    let mut group = c.benchmark_group("simulate_600s");
    group.sample_size(10);
    for mode in [Mode::Grid, Mode::Static] {
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| World::new(scenario.clone(), 1, mode).run(600.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, clustering, simulation);
criterion_main!(benches);
