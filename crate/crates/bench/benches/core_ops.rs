use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use congest_ftp_bench::bench_graph;
use congest_ftp_core::ftmbfs::{build_ftmbfs, FtmbfsConfig};
use congest_ftp_core::graph::{bfs_consistent, FaultSet};
use congest_ftp_core::oracle::{canonical_last_edges, verify_preserver};
use congest_ftp_core::sim::{delay_of, SharedSeed};

fn bench_bfs(c: &mut Criterion) {
    let mut group = c.benchmark_group("bfs_consistent");
    for n in [100usize, 400] {
        let g = bench_graph(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| bfs_consistent(black_box(g), 0, FaultSet::empty()))
        });
    }
    group.finish();
}

fn bench_delay(c: &mut Criterion) {
    let seed = SharedSeed { bits: 12345, broadcast_round: 0 };
    c.bench_function("delay_of", |b| {
        let mut k = 0u64;
        b.iter(|| {
            k = k.wrapping_add(1);
            delay_of(black_box(&seed), &[k, 3, 7], 64)
        })
    });
}

fn bench_verify(c: &mut Criterion) {
    let g = bench_graph(40);
    let h = canonical_last_edges(&g, &[0, 7], 1);
    c.bench_function("verify_preserver_f1_n40", |b| {
        b.iter(|| verify_preserver(black_box(&g), &h, &[0, 7], 1).unwrap())
    });
}

fn bench_build(c: &mut Criterion) {
    let g = bench_graph(60);
    let cfg = FtmbfsConfig::default();
    let mut group = c.benchmark_group("build_ftmbfs_n60");
    group.sample_size(10);
    group.bench_function("two_sources", |b| {
        b.iter(|| build_ftmbfs(black_box(&g), &[0, 17], &cfg, 5).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_bfs, bench_delay, bench_verify, bench_build);
criterion_main!(benches);
