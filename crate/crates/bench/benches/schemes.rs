//! Benchmarks for the hot paths: pairwise label evaluation, configuration
//! assembly, tensor counting, and the fusion pipeline.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use conic_schemes::coherent::intersection_tensor;
use conic_schemes::crossratio::rho_hat_coords_unchecked;
use conic_schemes::fusion::{five_class_fusion, three_class_and_srg_fusions};
use conic_schemes::group_action::{build_cc_formula, build_cc_orbit};
use conic_schemes_bench::{geometry, tower_geometry};

fn bench_rho_hat(c: &mut Criterion) {
    let g = tower_geometry(3); // F_64: 4096 lines
    let coords: Vec<_> = g.lines.iter().map(|l| l.coords.0).collect();
    c.bench_function("rho_hat_coords/F64/1k-pairs", |b| {
        b.iter(|| {
            let mut acc = 0u32;
            for i in 0..1000 {
                let l = &coords[i % coords.len()];
                let m = &coords[(i * 37 + 1) % coords.len()];
                acc ^= u32::from(rho_hat_coords_unchecked(&g.ctx, l, m).0);
            }
            black_box(acc)
        })
    });
}

fn bench_build_formula(c: &mut Criterion) {
    let g16 = geometry(16);
    c.bench_function("build_cc_formula/q16", |b| {
        b.iter(|| black_box(build_cc_formula(&g16)))
    });
    let g64 = tower_geometry(3);
    let mut group = c.benchmark_group("large");
    group.sample_size(10);
    group.bench_function("build_cc_formula/F64", |b| {
        b.iter(|| black_box(build_cc_formula(&g64)))
    });
    group.finish();
}

fn bench_orbit(c: &mut Criterion) {
    let g = geometry(16);
    c.bench_function("build_cc_orbit/q16", |b| {
        b.iter(|| black_box(build_cc_orbit(&g).unwrap()))
    });
}

fn bench_tensor(c: &mut Criterion) {
    let g = geometry(16);
    let conf = build_cc_formula(&g);
    c.bench_function("intersection_tensor/q16", |b| {
        b.iter(|| black_box(intersection_tensor(&conf.cc)))
    });
}

fn bench_fusion(c: &mut Criterion) {
    let g = tower_geometry(2);
    c.bench_function("five_class_fusion+merges/F16", |b| {
        b.iter_batched(
            || build_cc_formula(&g),
            |conf| {
                let five = five_class_fusion(&conf).unwrap();
                black_box(three_class_and_srg_fusions(&five).unwrap())
            },
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(
    benches,
    bench_rho_hat,
    bench_build_formula,
    bench_orbit,
    bench_tensor,
    bench_fusion
);
criterion_main!(benches);
