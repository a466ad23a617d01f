//! Compares the rayon-backed entry points against their sequential
//! fallbacks. Run with the default features for the parallel side and with
//! `--no-default-features` to measure the sequential build of the same
//! entry points.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use respair_core::cluster::{pairwise_distances, pairwise_distances_serial, PartTag, PointCloud};
use respair_core::ingest::{
    to_pairs, to_pairs_serial, Gazetteer, GazetteerEntry, RawRecord, Ruleset,
};

fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let tags = vec![PartTag::Row; n];
    let labels: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    PointCloud::new(points, tags, labels).expect("valid cloud")
}

fn record_batch(n: usize) -> Vec<RawRecord> {
    (0..n)
        .map(|i| RawRecord {
            timestamp: format!("t{i}"),
            user_id: format!("u{i}"),
            text: format!("I bought the gadget{} (@ Mall{})", i % 40, i % 12),
            latitude: 35.0 + 0.01 * (i % 100) as f64,
            longitude: 139.0 + 0.01 * (i % 100) as f64,
        })
        .collect()
}

fn grid_gazetteer() -> Gazetteer {
    let entries = (0..100)
        .map(|i| GazetteerEntry {
            city: format!("City{i:03}"),
            latitude: 34.5 + 0.013 * i as f64,
            longitude: 138.5 + 0.017 * i as f64,
        })
        .collect();
    Gazetteer::new(entries).expect("valid gazetteer")
}

fn bench_pairwise(c: &mut Criterion) {
    let cloud = random_cloud(600, 8, 17);
    let mut group = c.benchmark_group("pairwise_distances");
    group.bench_function("default", |b| {
        b.iter(|| pairwise_distances(black_box(&cloud)))
    });
    group.bench_function("serial", |b| {
        b.iter(|| pairwise_distances_serial(black_box(&cloud)))
    });
    group.finish();
}

fn bench_ingest(c: &mut Criterion) {
    let records = record_batch(4000);
    let gz = grid_gazetteer();
    let rules = Ruleset::default_rules();
    let mut group = c.benchmark_group("ingest_to_pairs");
    group.bench_function("default", |b| {
        b.iter(|| to_pairs(black_box(&records), &gz, &rules).expect("batch ingests"))
    });
    group.bench_function("serial", |b| {
        b.iter(|| to_pairs_serial(black_box(&records), &gz, &rules).expect("batch ingests"))
    });
    group.finish();
}

criterion_group!(benches, bench_pairwise, bench_ingest);
criterion_main!(benches);
