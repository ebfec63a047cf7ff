//! Dynamic-resolution benchmark harness for [`ScanCache`].
//!
//! A [`Scenario`] produces a stream of external square input sides. Each
//! sample walks the stages of a [`StageModel`]; stage `s` works on an internal
//! `ceil(E / stride_s)` square grid and requests its TopoA indices from the
//! cache before running a four-direction scan over a synthetic feature map.
//!
//! [`run_scenario`] measures the same stream twice: a *cold* run that starts
//! from an empty cache and a *warm* run on a cache primed by one untimed pass.
//! Index-service time and end-to-end time are recorded separately. The
//! reported hit rate is that of the cold run, which is what
//! [`analytic_hit_rate`] predicts for an unbounded cache.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsic_gate::BranchPair;
use crate::scan_cache::{CacheConfig, CacheKey, DeviceSignature, ScanCache};
use crate::scan_order::{build_topoa_indices, GridShape, IndexPair};
use crate::ssm::{multi_direction_scan, FeatureMap, SsmParams};

pub const DEFAULT_STRIDES: [usize; 4] = [4, 8, 16, 32];
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_WARMUP: usize = 8;
/// Sides of the five-scale recurring mixture.
pub const MULTI_SCALE_SIDES: [usize; 5] = [256, 320, 384, 448, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Fixed,
    TwoScale,
    MultiScale,
    UniquePerSample,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Fixed,
        ScenarioKind::TwoScale,
        ScenarioKind::MultiScale,
        ScenarioKind::UniquePerSample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fixed => "fixed",
            ScenarioKind::TwoScale => "two_scale",
            ScenarioKind::MultiScale => "multi_scale",
            ScenarioKind::UniquePerSample => "unique_per_sample",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fixed" => Ok(ScenarioKind::Fixed),
            "two_scale" => Ok(ScenarioKind::TwoScale),
            "multi_scale" => Ok(ScenarioKind::MultiScale),
            "unique" | "unique_per_sample" => Ok(ScenarioKind::UniquePerSample),
            _ => Err(Error::UnknownScenario(s.to_owned())),
        }
    }
}

/// How external input sides are drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeRule {
    Fixed(usize),
    /// Balanced mixture: the samples are split as evenly as possible across
    /// the listed sides, then shuffled with the scenario seed.
    Mixture(Vec<usize>),
    /// `side_i = base + step * i`.
    UniquePerSample {
        base: usize,
        step: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub sample_count: usize,
    pub sizes: SizeRule,
    pub seed: u64,
}

impl Scenario {
    /// The standard size rule for `kind`.
    pub fn new(kind: ScenarioKind, sample_count: usize, seed: u64) -> Self {
        let sizes = match kind {
            ScenarioKind::Fixed => SizeRule::Fixed(512),
            ScenarioKind::TwoScale => SizeRule::Mixture(vec![256, 512]),
            ScenarioKind::MultiScale => SizeRule::Mixture(MULTI_SCALE_SIDES.to_vec()),
            ScenarioKind::UniquePerSample => SizeRule::UniquePerSample { base: 256, step: 2 },
        };
        Self {
            kind,
            sample_count,
            sizes,
            seed,
        }
    }

    pub fn from_name(name: &str, sample_count: usize, seed: u64) -> Result<Self> {
        Ok(Self::new(name.parse()?, sample_count, seed))
    }

    pub fn with_sizes(mut self, sizes: SizeRule) -> Self {
        self.sizes = sizes;
        self
    }

    /// External side of every sample, in stream order.
    pub fn external_sides(&self) -> Vec<usize> {
        let n = self.sample_count;
        match &self.sizes {
            SizeRule::Fixed(side) => vec![*side; n],
            SizeRule::Mixture(sides) if sides.is_empty() => Vec::new(),
            SizeRule::Mixture(sides) => {
                let mut out: Vec<usize> = (0..n).map(|i| sides[i % sides.len()]).collect();
                out.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
                out
            }
            SizeRule::UniquePerSample { base, step } => (0..n).map(|i| base + step * i).collect(),
        }
    }
}

/// Downsampling stages visited by one forward pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageModel {
    strides: Vec<usize>,
    requests_per_stage: usize,
}

impl Default for StageModel {
    fn default() -> Self {
        Self {
            strides: DEFAULT_STRIDES.to_vec(),
            requests_per_stage: 1,
        }
    }
}

impl StageModel {
    pub fn new(strides: Vec<usize>, requests_per_stage: usize) -> Result<Self> {
        if strides.is_empty() || strides.contains(&0) {
            return Err(Error::InvalidStageModel(
                "strides must be positive and non-empty".into(),
            ));
        }
        if strides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStageModel(format!(
                "strides must be strictly increasing, got {strides:?}"
            )));
        }
        if requests_per_stage == 0 {
            return Err(Error::InvalidStageModel(
                "requests_per_stage must be positive".into(),
            ));
        }
        Ok(Self {
            strides,
            requests_per_stage,
        })
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn requests_per_stage(&self) -> usize {
        self.requests_per_stage
    }

    /// `ceil(external / stride)`, at least 1.
    pub fn internal_side(external: usize, stride: usize) -> usize {
        external.div_ceil(stride).max(1)
    }

    /// Internal grid shapes for one sample, one per stage.
    pub fn stage_shapes(&self, external: usize) -> Vec<GridShape> {
        self.strides
            .iter()
            .map(|&s| {
                let side = Self::internal_side(external, s);
                GridShape::new(side, side).expect("side >= 1")
            })
            .collect()
    }
}

/// Every cache request the scenario issues, in order.
pub fn key_stream(scenario: &Scenario, stages: &StageModel) -> Vec<CacheKey> {
    let device = DeviceSignature::host();
    let mut keys =
        Vec::with_capacity(scenario.sample_count * stages.strides.len() * stages.requests_per_stage);
    for side in scenario.external_sides() {
        for shape in stages.stage_shapes(side) {
            for _ in 0..stages.requests_per_stage {
                keys.push(CacheKey::from_shape(shape, device.clone()));
            }
        }
    }
    keys
}

/// Hit rate (percent) of an unbounded cache over the scenario, by counting
/// distinct internal resolutions against total requests.
pub fn analytic_hit_rate(scenario: &Scenario, stages: &StageModel) -> f64 {
    let mut unique = HashSet::new();
    let mut total = 0usize;
    for side in scenario.external_sides() {
        for &stride in &stages.strides {
            let s = StageModel::internal_side(side, stride);
            unique.insert((s, s));
            total += stages.requests_per_stage;
        }
    }
    if total == 0 {
        return 0.0;
    }
    100.0 * (1.0 - unique.len() as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    /// Index service plus a four-direction scan per stage.
    #[default]
    Full,
    /// Index service only.
    IndexOnly,
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub batch: usize,
    pub channels: usize,
    pub warmup: usize,
    pub workload: Workload,
    pub params: SsmParams,
    pub transfer_delay: Duration,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            batch: 1,
            channels: 4,
            warmup: DEFAULT_WARMUP,
            workload: Workload::Full,
            params: SsmParams::default(),
            transfer_delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBreakdown {
    pub stride: usize,
    pub requests: u64,
    pub hits: u64,
    pub index_cold_ms: f64,
    pub index_warm_ms: f64,
}

/// Result of one scenario. Latencies are per-sample means in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub cold_ms: f64,
    pub warm_ms: f64,
    pub reduction_pct: f64,
    pub hit_rate_pct: f64,
    pub index_cold_ms: f64,
    pub index_warm_ms: f64,
    pub index_reduction_pct: f64,
    pub fps: f64,
    pub samples: usize,
    pub strides: Vec<usize>,
    pub capacity: usize,
    pub seed: u64,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub unique_keys: usize,
    pub warm_hit_rate_pct: f64,
    pub checksum_cold: f64,
    pub checksum_warm: f64,
    pub stages: Vec<StageBreakdown>,
}

impl BenchReport {
    /// Copy with every wall-clock-derived field zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        out.cold_ms = 0.0;
        out.warm_ms = 0.0;
        out.reduction_pct = 0.0;
        out.index_cold_ms = 0.0;
        out.index_warm_ms = 0.0;
        out.index_reduction_pct = 0.0;
        out.fps = 0.0;
        for stage in &mut out.stages {
            stage.index_cold_ms = 0.0;
            stage.index_warm_ms = 0.0;
        }
        out
    }
}

/// Synthetic input for one stage of one sample.
fn synthetic_features(cfg: &HarnessConfig, shape: GridShape, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.batch * cfg.channels * shape.len();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureMap::new(cfg.batch, cfg.channels, shape, data).expect("consistent dims")
}

fn sample_seed(base: u64, sample: usize, stage: usize) -> u64 {
    base ^ ((sample as u64) << 8 | stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Default)]
struct PassTiming {
    end_to_end: Duration,
    index_service: Duration,
    per_stage_index: Vec<Duration>,
    per_stage_requests: Vec<u64>,
    per_stage_hits: Vec<u64>,
    checksum: f64,
}

/// Runs the whole sample stream once against `cache`. Inputs are generated
/// outside the timed region.
fn run_pass(
    cache: &ScanCache,
    sides: &[usize],
    stages: &StageModel,
    cfg: &HarnessConfig,
    seed: u64,
) -> PassTiming {
    let n_stages = stages.strides.len();
    let mut t = PassTiming {
        per_stage_index: vec![Duration::ZERO; n_stages],
        per_stage_requests: vec![0; n_stages],
        per_stage_hits: vec![0; n_stages],
        ..PassTiming::default()
    };
    let device = DeviceSignature::host();
    for (sample, &side) in sides.iter().enumerate() {
        let shapes = stages.stage_shapes(side);
        let inputs: Vec<Option<FeatureMap>> = shapes
            .iter()
            .enumerate()
            .map(|(stage, &shape)| {
                (cfg.workload == Workload::Full)
                    .then(|| synthetic_features(cfg, shape, sample_seed(seed, sample, stage)))
            })
            .collect();

        let start = Instant::now();
        for (stage, (&shape, input)) in shapes.iter().zip(&inputs).enumerate() {
            let key = CacheKey::from_shape(shape, device.clone());
            let mut indices: Option<Arc<IndexPair>> = None;
            for _ in 0..stages.requests_per_stage {
                let out = cache.get_or_build_traced(&key);
                t.index_service += out.elapsed;
                t.per_stage_index[stage] += out.elapsed;
                t.per_stage_requests[stage] += 1;
                t.per_stage_hits[stage] += u64::from(out.hit);
                indices = Some(out.indices);
            }
            if let (Some(x), Some(idx)) = (input, indices) {
                let y = multi_direction_scan(x, &idx, &cfg.params).expect("validated params");
                t.checksum += y.data().iter().sum::<f64>();
            }
        }
        t.end_to_end += start.elapsed();
    }
    t
}

fn ms_per(d: Duration, n: usize) -> f64 {
    d.as_secs_f64() * 1e3 / n.max(1) as f64
}

fn reduction(cold: f64, warm: f64) -> f64 {
    if cold > 0.0 {
        100.0 * (1.0 - warm / cold)
    } else {
        0.0
    }
}

/// Measures cold and warm runs of `scenario` (see module docs).
pub fn run_scenario(
    scenario: &Scenario,
    stages: &StageModel,
    cache_capacity: usize,
    cfg: &HarnessConfig,
) -> Result<BenchReport> {
    cfg.params.validate()?;
    if cfg.batch == 0 || cfg.channels == 0 {
        return Err(Error::InvalidParams("batch and channels must be positive".into()));
    }
    let cache_cfg = CacheConfig {
        capacity: cache_capacity,
        transfer_delay: cfg.transfer_delay,
    };
    let sides = scenario.external_sides();
    let n = sides.len();

    if cfg.warmup > 0 && n > 0 {
        let scratch = ScanCache::with_config(cache_cfg)?;
        let warm_sides: Vec<usize> = (0..cfg.warmup).map(|i| sides[i % n]).collect();
        run_pass(&scratch, &warm_sides, stages, cfg, scenario.seed);
    }

    let cold_cache = ScanCache::with_config(cache_cfg)?;
    let cold = run_pass(&cold_cache, &sides, stages, cfg, scenario.seed);
    let cold_stats = cold_cache.snapshot_stats();

    let warm_cache = ScanCache::with_config(cache_cfg)?;
    run_pass(
        &warm_cache,
        &sides,
        stages,
        &HarnessConfig {
            workload: Workload::IndexOnly,
            ..cfg.clone()
        },
        scenario.seed,
    );
    let primed = warm_cache.snapshot_stats();
    let warm = run_pass(&warm_cache, &sides, stages, cfg, scenario.seed);
    let warm_stats = warm_cache.snapshot_stats();
    let warm_requests = warm_stats.requests - primed.requests;
    let warm_hits = warm_stats.hits - primed.hits;

    let unique_keys = key_stream(scenario, stages)
        .into_iter()
        .collect::<HashSet<_>>()
        .len();
    let cold_ms = ms_per(cold.end_to_end, n);
    let warm_ms = ms_per(warm.end_to_end, n);
    let index_cold_ms = ms_per(cold.index_service, n);
    let index_warm_ms = ms_per(warm.index_service, n);

    Ok(BenchReport {
        scenario: scenario.kind.name().to_owned(),
        cold_ms,
        warm_ms,
        reduction_pct: reduction(cold_ms, warm_ms),
        hit_rate_pct: 100.0 * cold_stats.hits as f64 / cold_stats.requests.max(1) as f64,
        index_cold_ms,
        index_warm_ms,
        index_reduction_pct: reduction(index_cold_ms, index_warm_ms),
        fps: if warm_ms > 0.0 { 1000.0 / warm_ms } else { 0.0 },
        samples: n,
        strides: stages.strides.clone(),
        capacity: cache_capacity,
        seed: scenario.seed,
        requests: cold_stats.requests,
        hits: cold_stats.hits,
        misses: cold_stats.misses,
        evictions: cold_stats.evictions,
        unique_keys,
        warm_hit_rate_pct: 100.0 * warm_hits as f64 / warm_requests.max(1) as f64,
        checksum_cold: cold.checksum,
        checksum_warm: warm.checksum,
        stages: stages
            .strides
            .iter()
            .enumerate()
            .map(|(i, &stride)| StageBreakdown {
                stride,
                requests: cold.per_stage_requests[i],
                hits: cold.per_stage_hits[i],
                index_cold_ms: ms_per(cold.per_stage_index[i], n),
                index_warm_ms: ms_per(warm.per_stage_index[i], n),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::UnknownFormat(s.to_owned())),
        }
    }
}

/// Summary row written by the CSV format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSummary {
    pub scenario: String,
    pub cold_ms: f64,
    pub warm_ms: f64,
    pub reduction_pct: f64,
    pub hit_rate_pct: f64,
}

impl From<&BenchReport> for CsvSummary {
    fn from(r: &BenchReport) -> Self {
        Self {
            scenario: r.scenario.clone(),
            cold_ms: r.cold_ms,
            warm_ms: r.warm_ms,
            reduction_pct: r.reduction_pct,
            hit_rate_pct: r.hit_rate_pct,
        }
    }
}

/// Serializes reports. JSON emits one object per report (an array when more
/// than one); CSV emits the summary header followed by one row per report.
pub fn emit_reports(reports: &[BenchReport], format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = match reports {
                [single] => serde_json::to_vec_pretty(single),
                many => serde_json::to_vec_pretty(many),
            }
            .map_err(|e| Error::Serialize(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for r in reports {
                writer
                    .serialize(CsvSummary::from(r))
                    .map_err(|e| Error::Serialize(e.to_string()))?;
            }
            writer.into_inner().map_err(|e| Error::Serialize(e.to_string()))
        }
    }
}

pub fn emit_report(report: &BenchReport, format: ReportFormat) -> Result<Vec<u8>> {
    emit_reports(std::slice::from_ref(report), format)
}

/// Parses CSV written by [`emit_reports`].
pub fn parse_csv_summaries(bytes: &[u8]) -> Result<Vec<CsvSummary>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Serialize(e.to_string()))
}

/// Random `B x C x L` branch pair where the TopoA branch is a noisy copy of
/// the Cross branch, used by gate diagnostics.
pub fn synthetic_branch_pair(batch: usize, channels: usize, seq_len: usize, seed: u64) -> Result<BranchPair> {
    let shape = GridShape::new(1, seq_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch * channels * seq_len;
    let cross: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let topoa: Vec<f64> = cross
        .iter()
        .map(|&c| 0.7 * c + 0.3 * rng.gen_range(-1.0..1.0))
        .collect();
    BranchPair::new(
        FeatureMap::new(batch, channels, shape, cross)?,
        FeatureMap::new(batch, channels, shape, topoa)?,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct StressReport {
    pub threads: usize,
    pub keys: usize,
    pub iters: usize,
    pub capacity: usize,
    pub mismatches: u64,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub constructions: u64,
    pub final_len: usize,
}

impl StressReport {
    /// Oracle equivalence held and the counters are conserved.
    pub fn is_consistent(&self) -> bool {
        self.mismatches == 0
            && self.requests == self.hits + self.misses
            && self.requests == (self.threads * self.iters) as u64
            && self.final_len <= self.capacity
            && self.evictions <= self.misses
    }
}

/// Hammers one shared cache from `threads` threads, each issuing `iters`
/// requests over a pool of `keys` random shapes (on two devices), and checks
/// every returned pair against an uncached build.
pub fn stress_cache(
    threads: usize,
    keys: usize,
    iters: usize,
    capacity: usize,
    seed: u64,
) -> Result<StressReport> {
    if threads == 0 || keys == 0 {
        return Err(Error::InvalidParams("threads and keys must be positive".into()));
    }
    let cache = ScanCache::new(capacity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = [DeviceSignature::host(), DeviceSignature::new("accel:0")?];
    let pool: Vec<CacheKey> = (0..keys)
        .map(|i| {
            let shape = GridShape::new(rng.gen_range(1..=48), rng.gen_range(1..=48)).expect("positive");
            CacheKey::from_shape(shape, devices[i % devices.len()].clone())
        })
        .collect();
    let expected: Vec<IndexPair> = pool.iter().map(|k| build_topoa_indices(k.shape())).collect();

    let mismatches: u64 = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (cache, pool, expected) = (&cache, &pool, &expected);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64 + 1));
                    let mut bad = 0u64;
                    for _ in 0..iters {
                        let i = rng.gen_range(0..pool.len());
                        if *cache.get_or_build(&pool[i]) != expected[i] {
                            bad += 1;
                        }
                    }
                    bad
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("stress worker panicked"))
            .sum()
    });

    let stats = cache.snapshot_stats();
    Ok(StressReport {
        threads,
        keys,
        iters,
        capacity,
        mismatches,
        requests: stats.requests,
        hits: stats.hits,
        misses: stats.misses,
        evictions: stats.evictions,
        constructions: stats.constructions,
        final_len: cache.len(),
    })
}
