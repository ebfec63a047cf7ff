use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use toposcan::harness::synthetic_branch_pair;
use toposcan::hsic_gate::{GateConfig, HsicGate};
use toposcan::scan_order::{build_topoa_indices, GridShape};
use toposcan::ssm::{multi_direction_scan, SsmParams};
use toposcan_bench::{random_features, SIDES};

fn scan(c: &mut Criterion) {
    let params = SsmParams::default();
    let mut group = c.benchmark_group("multi_direction_scan");
    for side in SIDES {
        let shape = GridShape::new(side, side).unwrap();
        let x = random_features(1, 4, shape, 7);
        let indices = build_topoa_indices(shape);
        group.bench_function(BenchmarkId::from_parameter(side), |b| {
            b.iter(|| multi_direction_scan(black_box(&x), &indices, &params).unwrap())
        });
    }
    group.finish();
}

fn gate(c: &mut Criterion) {
    let mut group = c.benchmark_group("hsic_fuse");
    for (channels, seq_len) in [(16, 256), (32, 1024), (64, 4096)] {
        let pair = synthetic_branch_pair(2, channels, seq_len, 3).unwrap();
        let gate = HsicGate::new(GateConfig::default()).unwrap();
        gate.fuse(&pair).unwrap();
        group.bench_function(BenchmarkId::new(format!("c{channels}"), seq_len), |b| {
            b.iter(|| gate.fuse(black_box(&pair)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scan, gate);
criterion_main!(benches);
