use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toposcan::harness::{
    analytic_hit_rate, emit_reports, key_stream, run_scenario, stress_cache, synthetic_branch_pair,
    HarnessConfig, ReportFormat, Scenario, StageModel, Workload, DEFAULT_SAMPLES, DEFAULT_WARMUP,
};
use toposcan::hsic_gate::{GateConfig, HsicGate};
use toposcan::scan_cache::DEFAULT_CAPACITY;
use toposcan::scan_order::{build_indices, GridShape, ScanKind};
use toposcan::topo_metrics::report_from_manifest;

const SEED_ENV: &str = "TOPOSCAN_SEED";

#[derive(Parser)]
#[command(
    name = "toposcan",
    version,
    about = "Scan-order cache benchmarks and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dynamic-resolution cache benchmarks.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Scan index utilities.
    #[command(subcommand)]
    Scan(ScanCmd),
    /// HSIC gate utilities.
    #[command(subcommand)]
    Gate(GateCmd),
    /// Topology metrics over mask pairs.
    #[command(subcommand)]
    Topo(TopoCmd),
    /// Concurrency checks for the scan cache.
    #[command(subcommand)]
    Cache(CacheCmd),
}

#[derive(Args)]
struct ScenarioArgs {
    /// fixed, two-scale, multi-scale or unique
    #[arg(long, default_value = "fixed")]
    scenario: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    strides: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    requests_per_stage: usize,
    /// Overridden by TOPOSCAN_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Time cold and warm runs of a scenario.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_CAPACITY)]
        capacity: usize,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 4)]
        channels: usize,
        /// Time only the index service, skipping the scans.
        #[arg(long)]
        index_only: bool,
        /// Simulated placement-transfer delay in microseconds.
        #[arg(long, default_value_t = 0)]
        transfer_delay_us: u64,
    },
    /// Print the unbounded-capacity hit rate without running the pipeline.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Topoa,
    Cross,
}

#[derive(Subcommand)]
enum ScanCmd {
    /// Write the forward and inverse index rows as JSON.
    Dump {
        #[arg(long)]
        h: usize,
        #[arg(long)]
        w: usize,
        #[arg(long, value_enum, default_value = "topoa")]
        kind: KindArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GateCmd {
    /// Gate statistics for a seeded synthetic branch pair.
    Diag {
        #[arg(long, default_value_t = 2)]
        b: usize,
        #[arg(long, default_value_t = 8)]
        c: usize,
        #[arg(long, default_value_t = 256)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        d_proj: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.5)]
        temperature: f64,
        #[arg(long, default_value_t = 0.2)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TopoCmd {
    /// Pooled CCE, HCE and ETM over a manifest of `pred gt class` lines.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CacheCmd {
    /// Parallel get_or_build storm checked against uncached builds.
    Stress {
        #[arg(long, default_value_t = 8)]
        threads: usize,
        #[arg(long, default_value_t = 32)]
        keys: usize,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = DEFAULT_CAPACITY)]
        capacity: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
struct Failure {
    kind: String,
    message: String,
}

impl From<toposcan::Error> for Failure {
    fn from(e: toposcan::Error) -> Self {
        Self {
            kind: e.kind().to_owned(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        toposcan::Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self {
            kind: "serialize".into(),
            message: e.to_string(),
        }
    }
}

fn failure(kind: &str, message: impl Into<String>) -> Failure {
    Failure {
        kind: kind.into(),
        message: message.into(),
    }
}

fn report_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
}

fn resolve_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            failure(
                "invalid_seed",
                format!("{SEED_ENV}={v:?} is not an unsigned integer"),
            )
        }),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(failure("invalid_seed", format!("{SEED_ENV}: {e}"))),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_output(out, &bytes)
}

fn scenario_and_stages(args: &ScenarioArgs) -> Result<(Scenario, StageModel), Failure> {
    if args.samples == 0 {
        return Err(failure("invalid_params", "--samples must be positive"));
    }
    let scenario = Scenario::from_name(&args.scenario, args.samples, resolve_seed(args.seed)?)?;
    let stages = StageModel::new(args.strides.clone(), args.requests_per_stage)?;
    Ok((scenario, stages))
}

#[derive(Serialize)]
struct OracleReport {
    scenario: String,
    samples: usize,
    strides: Vec<usize>,
    seed: u64,
    requests: usize,
    unique_keys: usize,
    hit_rate_pct: f64,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bench(BenchCmd::Run {
            scenario,
            capacity,
            format,
            out,
            warmup,
            batch,
            channels,
            index_only,
            transfer_delay_us,
        }) => {
            let format: ReportFormat = format.parse()?;
            let (scenario, stages) = scenario_and_stages(&scenario)?;
            let cfg = HarnessConfig {
                batch,
                channels,
                warmup,
                workload: if index_only {
                    Workload::IndexOnly
                } else {
                    Workload::Full
                },
                transfer_delay: Duration::from_micros(transfer_delay_us),
                ..HarnessConfig::default()
            };
            let report = run_scenario(&scenario, &stages, capacity, &cfg)?;
            write_output(out.as_deref(), &emit_reports(&[report], format)?)
        }
        Command::Bench(BenchCmd::Oracle { scenario }) => {
            let (scenario, stages) = scenario_and_stages(&scenario)?;
            let keys = key_stream(&scenario, &stages);
            let unique_keys = keys.iter().collect::<std::collections::HashSet<_>>().len();
            write_json(
                None,
                &OracleReport {
                    scenario: scenario.kind.name().to_owned(),
                    samples: scenario.sample_count,
                    strides: stages.strides().to_vec(),
                    seed: scenario.seed,
                    requests: keys.len(),
                    unique_keys,
                    hit_rate_pct: analytic_hit_rate(&scenario, &stages),
                },
            )
        }
        Command::Scan(ScanCmd::Dump { h, w, kind, out }) => {
            let kind = match kind {
                KindArg::Topoa => ScanKind::Topoa,
                KindArg::Cross => ScanKind::Cross,
            };
            let pair = build_indices(kind, GridShape::new(h, w)?);
            write_json(out.as_deref(), &pair.to_dump())
        }
        Command::Gate(GateCmd::Diag {
            b,
            c,
            l,
            seed,
            d_proj,
            alpha,
            temperature,
            rho,
            out,
        }) => {
            let seed = resolve_seed(seed)?;
            let gate = HsicGate::new(GateConfig {
                d_proj,
                alpha,
                temperature,
                rho,
                seed,
            })?;
            let pair = synthetic_branch_pair(b, c, l, seed)?;
            let fused = gate.fuse(&pair)?;
            write_json(out.as_deref(), &fused.diagnostics)
        }
        Command::Topo(TopoCmd::Report { manifest, out }) => {
            write_json(out.as_deref(), &report_from_manifest(&manifest)?)
        }
        Command::Cache(CacheCmd::Stress {
            threads,
            keys,
            iters,
            capacity,
            seed,
        }) => {
            let report = stress_cache(threads, keys, iters, capacity, resolve_seed(seed)?)?;
            write_json(None, &report)?;
            if report.is_consistent() {
                Ok(())
            } else {
                Err(failure(
                    "stress_inconsistent",
                    "cache diverged from uncached builds or counters",
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report_error(&f.kind, &f.message);
            ExitCode::FAILURE
        }
    }
}
