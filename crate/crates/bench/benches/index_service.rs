use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use toposcan::scan_cache::{CacheKey, DeviceSignature, ScanCache};
use toposcan::scan_order::{build_cross_indices, build_topoa_indices, GridShape};
use toposcan_bench::SIDES;

fn construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("build");
    for side in SIDES {
        let shape = GridShape::new(side, side).unwrap();
        group.bench_with_input(BenchmarkId::new("topoa", side), &shape, |b, &s| {
            b.iter(|| build_topoa_indices(black_box(s)))
        });
        group.bench_with_input(BenchmarkId::new("cross", side), &shape, |b, &s| {
            b.iter(|| build_cross_indices(black_box(s)))
        });
    }
    group.finish();
}

fn cache_hit(c: &mut Criterion) {
    let mut group = c.benchmark_group("cache_hit");
    for side in SIDES {
        let cache = ScanCache::default();
        let key = CacheKey::from_shape(GridShape::new(side, side).unwrap(), DeviceSignature::host());
        cache.get_or_build(&key);
        group.bench_with_input(BenchmarkId::from_parameter(side), &key, |b, k| {
            b.iter(|| cache.get_or_build(black_box(k)))
        });
    }
    group.finish();
}

fn cache_transfer(c: &mut Criterion) {
    let cache = ScanCache::default();
    let key = CacheKey::from_shape(GridShape::new(64, 64).unwrap(), DeviceSignature::host());
    let elsewhere = DeviceSignature::new("accel:0").unwrap();
    cache.get_or_build(&key);
    c.bench_function("cache_transfer/64", |b| {
        b.iter(|| {
            cache.relocate_all(&elsewhere);
            cache.get_or_build(black_box(&key))
        })
    });
}

criterion_group!(benches, construction, cache_hit, cache_transfer);
criterion_main!(benches);
