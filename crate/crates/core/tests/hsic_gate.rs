mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toposcan::hsic_gate::{
    fuse, gate_weight, hsic_estimate, project_and_normalize, rbf_kernel, sample_projection, BranchPair,
    GateConfig, HsicGate, ProjectionKey,
};
use toposcan::scan_order::GridShape;
use toposcan::ssm::FeatureMap;

fn random_features(rng: &mut ChaCha8Rng, batch: usize, channels: usize, len: usize) -> FeatureMap {
    FeatureMap::from_fn(batch, channels, GridShape::new(1, len).unwrap(), |_, _, _| {
        rng.gen_range(-1.0..1.0)
    })
    .unwrap()
}

fn to_rows(k: &Array2<f64>) -> Vec<Vec<f64>> {
    k.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn hsic_matches_trace_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let c = rng.gen_range(2..=24);
        let dim = rng.gen_range(1..=6);
        let xc = Array2::from_shape_simple_fn((c, dim), || rng.gen_range(-1.0..1.0));
        let xt = Array2::from_shape_simple_fn((c, dim), || rng.gen_range(-1.0..1.0));
        let sigma = rng.gen_range(0.05..3.0);
        let kc = rbf_kernel(xc.view(), sigma).unwrap();
        let kt = rbf_kernel(xt.view(), sigma).unwrap();
        let hsic = hsic_estimate(kc.view(), kt.view()).unwrap();
        let oracle = common::hsic_trace_form(&to_rows(&kc), &to_rows(&kt));
        assert!(
            common::rel_close(hsic, oracle, 1e-10, 1e-300),
            "{hsic} vs {oracle}"
        );
        assert!(hsic >= -1e-12);
    }
}

#[test]
fn descriptors_are_unit_or_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = Array2::from_shape_simple_fn((6, 100), || rng.gen_range(-1.0..1.0));
    let p = sample_projection(ProjectionKey {
        seq_len: 100,
        width: 64,
        seed: 2,
    });
    let x = project_and_normalize(f.view(), p.view()).unwrap();
    for row in x.rows() {
        let norm = row.dot(&row).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rbf_kernel_symmetric_with_unit_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_simple_fn((9, 4), || rng.gen_range(-1.0..1.0));
    let k = rbf_kernel(x.view(), 0.4).unwrap();
    for i in 0..9 {
        assert_eq!(k[[i, i]], 1.0);
        for j in 0..9 {
            assert_eq!(k[[i, j]], k[[j, i]]);
            assert!(k[[i, j]] > 0.0 && k[[i, j]] <= 1.0);
        }
    }
}

#[test]
fn forced_zero_hsic_blends_point_four_point_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let fc = random_features(&mut rng, 2, 5, 40);
    // identical channels make the TopoA kernel constant, so HSIC is 0
    let base: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ft = FeatureMap::from_fn(2, 5, GridShape::new(1, 40).unwrap(), |_, _, l| base[l]).unwrap();
    let out = fuse(
        &BranchPair::new(fc.clone(), ft.clone()).unwrap(),
        &GateConfig::default(),
    )
    .unwrap();
    for d in &out.diagnostics {
        assert!(d.hsic.abs() < 1e-12);
        assert_eq!(d.w, 0.5);
    }
    for ((o, c), t) in out.output.data().iter().zip(fc.data()).zip(ft.data()) {
        assert!((o - (0.4 * c + 0.6 * t)).abs() < 1e-12);
    }
}

#[test]
fn gate_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pair = BranchPair::new(
        random_features(&mut rng, 3, 6, 50),
        random_features(&mut rng, 3, 6, 50),
    )
    .unwrap();
    let cfg = GateConfig {
        seed: 99,
        ..GateConfig::default()
    };
    let a = fuse(&pair, &cfg).unwrap();
    let b = fuse(&pair, &cfg).unwrap();
    assert_eq!(a.diagnostics, b.diagnostics);
    assert_eq!(a.output, b.output);
    let gate = HsicGate::new(cfg).unwrap();
    gate.fuse(&pair).unwrap();
    gate.fuse(&pair).unwrap();
    assert_eq!(gate.projections().len(), 1);
}

#[test]
fn projection_roughly_preserves_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (len, k, n) = (1024, 64, 40);
    let scales: Vec<f64> = (0..n).map(|i| 0.2 + 0.1 * i as f64).collect();
    let x = Array2::from_shape_fn((n, len), |(i, _)| rng.gen_range(-1.0..1.0) * scales[i]);
    let p = sample_projection(ProjectionKey {
        seq_len: len,
        width: k,
        seed: 5,
    });
    let y = x.dot(&p);
    let mut orig = Vec::new();
    let mut proj = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = &x.row(i) - &x.row(j);
            let e = &y.row(i) - &y.row(j);
            orig.push(d.dot(&d));
            proj.push(e.dot(&e));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mo, mp) = (mean(&orig), mean(&proj));
    let cov: f64 = orig.iter().zip(&proj).map(|(a, b)| (a - mo) * (b - mp)).sum();
    let vo: f64 = orig.iter().map(|a| (a - mo).powi(2)).sum();
    let vp: f64 = proj.iter().map(|b| (b - mp).powi(2)).sum();
    let corr = cov / (vo * vp).sqrt();
    assert!(corr > 0.5, "correlation {corr}");
    // E|Px|^2 = |x|^2 under N(0, 1/k) entries
    assert!((mp / mo - 1.0).abs() < 0.25, "ratio {}", mp / mo);
}

proptest! {
    #[test]
    fn identical_branches_are_fixed_points(
        seed in any::<u64>(),
        rho in 0.0f64..=1.0,
        temperature in 0.1f64..5.0,
        alpha in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_features(&mut rng, 2, 4, 24);
        let cfg = GateConfig { rho, temperature, alpha, seed, ..GateConfig::default() };
        let out = fuse(&BranchPair::new(f.clone(), f.clone()).unwrap(), &cfg).unwrap();
        for (o, v) in out.output.data().iter().zip(f.data()) {
            prop_assert!((o - v).abs() <= 1e-12 * v.abs().max(1e-300));
        }
    }

    #[test]
    fn output_stays_within_branch_envelope(seed in any::<u64>(), rho in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fc = random_features(&mut rng, 2, 4, 30);
        let ft = random_features(&mut rng, 2, 4, 30);
        let cfg = GateConfig { rho, ..GateConfig::default() };
        let out = fuse(&BranchPair::new(fc.clone(), ft.clone()).unwrap(), &cfg).unwrap();
        for d in &out.diagnostics {
            prop_assert!(d.w > 0.0 && d.w < 1.0);
            prop_assert!(d.hsic >= -1e-12);
        }
        for ((o, c), t) in out.output.data().iter().zip(fc.data()).zip(ft.data()) {
            let (lo, hi) = (c.min(*t), c.max(*t));
            prop_assert!(*o >= lo - 1e-12 && *o <= hi + 1e-12);
        }
    }

    #[test]
    fn larger_hsic_weights_topoa_more(h1 in -5.0f64..5.0, dh in 1e-3f64..5.0, alpha in 0.01f64..2.0) {
        let cfg = GateConfig { alpha, ..GateConfig::default() };
        prop_assert!(gate_weight(h1 + dh, &cfg) > gate_weight(h1, &cfg));
    }

    #[test]
    fn weighting_never_decreases(h1 in -500.0f64..500.0, dh in 0.0f64..500.0, alpha in 0.0f64..10.0) {
        let cfg = GateConfig { alpha, ..GateConfig::default() };
        prop_assert!(gate_weight(h1 + dh, &cfg) >= gate_weight(h1, &cfg));
    }
}
