use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dropzone_core::flatness::{flatness_mask, normalize_depth};
use dropzone_core::fusion::{Provenance, SafetyMap};
use dropzone_core::metrics::{average_precision, roc_auc};
use dropzone_core::zones::{generate_candidates, score_lattice};
use dropzone_core::{BinaryMask, FlatnessParams, ScalarGrid, ZoneParams};

/// Tilted plane with a few boxes and some deterministic ripple.
fn depth(w: usize, h: usize) -> ScalarGrid {
    ScalarGrid::from_fn(w, h, |x, y| {
        let boxy = (x / 97 + y / 61) % 5 == 0;
        let ripple = ((x * 31 + y * 17) % 13) as f64 * 0.01;
        10.0 + 0.01 * y as f64 + ripple + if boxy { 3.0 } else { 0.0 }
    })
    .unwrap()
}

fn unsafe_mask(w: usize, h: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| (x / 40 + y / 30) % 7 == 0 || (x * 7 + y * 3) % 101 == 0).unwrap()
}

fn bench_flatness(c: &mut Criterion) {
    let mut group = c.benchmark_group("flatness_mask");
    group.sample_size(10);
    let params = FlatnessParams::default();
    for (w, h) in [(640, 480), (1280, 720)] {
        let norm = normalize_depth(&depth(w, h), params.epsilon).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{w}x{h}")), &norm, |b, n| {
            b.iter(|| flatness_mask(black_box(n), &params).unwrap())
        });
    }
    group.finish();
}

fn bench_zones(c: &mut Criterion) {
    let mask = unsafe_mask(1280, 720);
    c.bench_function("score_lattice/1280x720_r40", |b| b.iter(|| score_lattice(black_box(&mask), 40.0).unwrap()));
    let map = SafetyMap::new(mask.clone(), Provenance::Refined);
    let params = ZoneParams { default_radius: 40.0, ..ZoneParams::default() };
    c.bench_function("generate_candidates/1280x720_r40", |b| {
        b.iter(|| generate_candidates(black_box(&map), &params, None).unwrap())
    });
}

fn bench_metrics(c: &mut Criterion) {
    let n = 10_000;
    let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let labels: Vec<bool> = (0..n).map(|i| (i * 104_729) % 3 == 0).collect();
    c.bench_function("roc_auc/10k", |b| b.iter(|| roc_auc(black_box(&scores), &labels)));
    c.bench_function("average_precision/10k", |b| b.iter(|| average_precision(black_box(&scores), &labels)));
}

criterion_group!(benches, bench_flatness, bench_zones, bench_metrics);
criterion_main!(benches);
