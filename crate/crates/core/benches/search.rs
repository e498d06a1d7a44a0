use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fisheye_me::projection::make_equisolid;
use fisheye_me::search::estimate_with;
use fisheye_me::synth::{generate_sequence_with, PlaneScene};
use fisheye_me::{Method, Parallelism, SearchConfig};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn search(c: &mut Criterion) {
    let profile = make_equisolid(43.0, (63.5, 63.5), 185.0).unwrap();
    let scene = PlaneScene::standard().with_supersampling(1);
    let seq = generate_sequence_with(&scene, &profile, 128, 128, 2, (4.0, 1.0), Parallelism::Sequential).unwrap();
    let (reference, cur) = (&seq.frames[0], &seq.frames[1]);

    let mut group = c.benchmark_group("estimate_128x128_r8");
    group.sample_size(10);
    for method in [Method::Tme, Method::HmePlus] {
        let cfg = SearchConfig::new(16, 8, method).unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(method.name(), name), &mode, |b, &mode| {
                b.iter(|| estimate_with(black_box(cur), black_box(reference), &cfg, Some(&profile), mode).unwrap())
            });
        }
    }
    group.finish();
}

fn render(c: &mut Criterion) {
    let profile = make_equisolid(43.0, (63.5, 63.5), 185.0).unwrap();
    let scene = PlaneScene::standard();
    let mut group = c.benchmark_group("synth_128x128");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| generate_sequence_with(&scene, &profile, 128, 128, 2, (4.0, 0.0), mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, search, render);
criterion_main!(benches);
