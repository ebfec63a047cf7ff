//! Topology-aware scan ordering for visual state-space models.
//!
//! * [`scan_order`] builds diagonal/anti-diagonal zigzag (TopoA) and
//!   axis-aligned (Cross) scan permutations with their inverses.
//! * [`scan_cache`] amortizes index construction with a device-aware LRU cache.
//! * [`ssm`] runs a fixed-parameter state-space recurrence along each scan
//!   direction and restores raster order.
//! * [`hsic_gate`] fuses the two branches with a kernel-dependence gate.
//! * [`topo_metrics`] scores binary masks by component and hole counts.
//! * [`harness`] drives dynamic-resolution caching benchmarks.

pub mod error;
pub mod harness;
pub mod hsic_gate;
pub mod scan_cache;
pub mod scan_order;
pub mod ssm;
pub mod topo_metrics;

pub use error::{Error, Result};
pub use harness::{
    analytic_hit_rate, emit_report, key_stream, run_scenario, BenchReport, HarnessConfig, ReportFormat,
    Scenario, ScenarioKind, StageModel,
};
pub use hsic_gate::{fuse, BranchPair, GateConfig, GateDiagnostics, HsicGate};
pub use scan_cache::{CacheEntry, CacheKey, CacheStats, DeviceSignature, ScanCache};
pub use scan_order::{
    build_base_antidiagonal, build_base_diagonal, build_cross_indices, build_topoa_indices, CrossIndexPair,
    GridShape, IndexPair, ScanKind,
};
pub use ssm::{discretize, multi_direction_scan, scan_sequence, FeatureMap, SsmParams};
pub use topo_metrics::{count_components, count_holes, topo_errors, BinaryMask, TopoErrors};
