use std::collections::BTreeSet;

use toposcan::harness::{
    analytic_hit_rate, emit_reports, key_stream, parse_csv_summaries, run_scenario, stress_cache,
    HarnessConfig, ReportFormat, Scenario, ScenarioKind, SizeRule, StageModel, Workload, DEFAULT_SAMPLES,
};

fn index_only() -> HarnessConfig {
    HarnessConfig {
        workload: Workload::IndexOnly,
        warmup: 2,
        ..HarnessConfig::default()
    }
}

/// Hit rate of an unbounded cache, counted from the sides directly.
fn counted_hit_rate(sides: &[usize], strides: &[usize]) -> (u64, u64) {
    let mut seen = BTreeSet::new();
    let mut hits = 0;
    let mut total = 0;
    for &side in sides {
        for &stride in strides {
            let internal = side.div_ceil(stride);
            if !seen.insert(internal) {
                hits += 1;
            }
            total += 1;
        }
    }
    (hits, total)
}

#[test]
fn measured_hit_rate_equals_counting_oracle() {
    let stages = StageModel::default();
    for kind in ScenarioKind::ALL {
        let scenario = Scenario::new(kind, DEFAULT_SAMPLES, 17);
        let report = run_scenario(&scenario, &stages, usize::MAX / 2, &index_only()).unwrap();
        let (hits, total) = counted_hit_rate(&scenario.external_sides(), stages.strides());
        assert_eq!(report.requests, total, "{}", kind.name());
        assert_eq!(report.hits, hits, "{}", kind.name());
        let oracle = 100.0 * hits as f64 / total as f64;
        assert!((report.hit_rate_pct - oracle).abs() < 1e-12);
        assert!((analytic_hit_rate(&scenario, &stages) - oracle).abs() < 1e-12);
        assert_eq!(report.warm_hit_rate_pct, 100.0);
    }
}

#[test]
fn default_scenarios_are_ordered() {
    let stages = StageModel::default();
    let rates: Vec<f64> = ScenarioKind::ALL
        .iter()
        .map(|&k| analytic_hit_rate(&Scenario::new(k, DEFAULT_SAMPLES, 0), &stages))
        .collect();
    assert_eq!(rates, vec![99.0, 98.75, 95.75, 75.25]);
    assert!(rates.windows(2).all(|w| w[0] > w[1]));
    assert!(rates[3] > 0.0);
}

#[test]
fn key_stream_follows_sides_and_strides() {
    let scenario = Scenario::new(ScenarioKind::UniquePerSample, 3, 0);
    let keys = key_stream(&scenario, &StageModel::default());
    let sides: Vec<usize> = keys.iter().map(|k| k.height()).collect();
    assert_eq!(sides, vec![64, 32, 16, 8, 65, 33, 17, 9, 65, 33, 17, 9]);
    assert!(keys.iter().all(|k| k.height() == k.width()));
}

#[test]
fn tiny_capacity_thrashes() {
    let stages = StageModel::default();
    let scenario = Scenario::new(ScenarioKind::MultiScale, 40, 3);
    let unbounded = run_scenario(&scenario, &stages, 1 << 20, &index_only()).unwrap();
    let one = run_scenario(&scenario, &stages, 1, &index_only()).unwrap();
    assert!(one.hit_rate_pct < unbounded.hit_rate_pct);
    assert_eq!(
        one.hits, 0,
        "strides cycle through distinct keys so a single slot never hits"
    );
    assert!(one.evictions > 0);
    assert_eq!(unbounded.evictions, 0);
}

#[test]
fn custom_two_scale_mixture() {
    let scenario =
        Scenario::new(ScenarioKind::TwoScale, 100, 9).with_sizes(SizeRule::Mixture(vec![256, 300]));
    let stages = StageModel::default();
    assert_eq!(analytic_hit_rate(&scenario, &stages), 98.0);
}

#[test]
fn runs_are_deterministic_apart_from_timings() {
    let stages = StageModel::new(vec![8, 16, 32], 1).unwrap();
    let scenario = Scenario::new(ScenarioKind::TwoScale, 6, 5);
    let cfg = HarnessConfig {
        warmup: 1,
        ..HarnessConfig::default()
    };
    let a = run_scenario(&scenario, &stages, 64, &cfg).unwrap();
    let b = run_scenario(&scenario, &stages, 64, &cfg).unwrap();
    assert_eq!(a.without_timings(), b.without_timings());
    assert_eq!(a.checksum_cold, a.checksum_warm);
    assert!(a.checksum_cold != 0.0);
}

#[test]
fn csv_and_json_agree() {
    let stages = StageModel::default();
    let reports: Vec<_> = ScenarioKind::ALL
        .iter()
        .map(|&k| run_scenario(&Scenario::new(k, 10, 1), &stages, 64, &index_only()).unwrap())
        .collect();
    let csv = parse_csv_summaries(&emit_reports(&reports, ReportFormat::Csv).unwrap()).unwrap();
    let json: Vec<toposcan::harness::BenchReport> =
        serde_json::from_slice(&emit_reports(&reports, ReportFormat::Json).unwrap()).unwrap();
    assert_eq!(json, reports);
    for (row, r) in csv.iter().zip(&reports) {
        assert_eq!(row.scenario, r.scenario);
        assert_eq!(row.hit_rate_pct, r.hit_rate_pct);
        assert_eq!(row.cold_ms, r.cold_ms);
    }
}

#[test]
fn stress_run_is_consistent() {
    let report = stress_cache(8, 24, 500, 12, 42).unwrap();
    assert!(report.is_consistent(), "{report:?}");
    assert!(report.evictions > 0);
}
