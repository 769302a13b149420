//! Command-line entry point: run benchmarks, verify recorded traces against
//! the concurrency semantics, and generate lattice road graphs.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Parser, Subcommand};
use roam_engine::bench::{run_benchmark, Pace, PlacementKind, WorkloadConfig};
use roam_engine::oracle;
use roam_engine::protocol::Semantics;
use roam_engine::trace;
use roam_engine::workload::{lattice_road_graph_text, Model};

#[derive(Parser)]
#[command(
    name = "roam",
    about = "Actor-partitioned moving-object platform: benchmarks, trace verification, road graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark workload and report throughput/latency metrics.
    Run(Box<RunArgs>),
    /// Check a recorded trace against the concurrency semantics.
    Verify(VerifyArgs),
    /// Generate a lattice road graph file.
    GenGraph(GenGraphArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Concurrency semantics: fresh | snap
    #[arg(long)]
    semantics: Option<String>,
    #[arg(long)]
    snapshot_interval_ms: Option<u64>,
    /// Movement model: uniform | gaussian | roadnet
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    actors: Option<u64>,
    #[arg(long)]
    shards: Option<u32>,
    #[arg(long)]
    space_km2: Option<f64>,
    /// Total cell count (the grid uses the nearest square).
    #[arg(long)]
    cells: Option<u32>,
    #[arg(long)]
    hotspots: Option<usize>,
    #[arg(long)]
    sensing_pct: Option<f64>,
    #[arg(long)]
    query_ratio: Option<f64>,
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Append the metrics row to this CSV file.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Write the execution trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Cell placement across shards: spatial | random
    #[arg(long)]
    placement: Option<String>,
    #[arg(long)]
    clients_per_shard: Option<u32>,
    #[arg(long)]
    move_period_ms: Option<u64>,
    /// Client pacing: period | asap
    #[arg(long)]
    pace: Option<String>,
    #[arg(long)]
    max_speed_kmh: Option<f64>,
    #[arg(long)]
    fence_m: Option<f64>,
    #[arg(long)]
    query_m: Option<f64>,
    #[arg(long)]
    road_file: Option<PathBuf>,
    #[arg(long)]
    fixed_speed: Option<f64>,
    #[arg(long)]
    sigma_m: Option<f64>,
    #[arg(long)]
    threads_per_shard: Option<usize>,
    #[arg(long)]
    cross_shard_latency_us: Option<u64>,
    /// Run the semantics checkers on the trace after the run.
    #[arg(long, default_value_t = false)]
    verify: bool,
}

struct ConfigFile {
    entries: HashMap<String, String>,
    path: String,
}

impl ConfigFile {
    fn load(path: Option<&PathBuf>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(ConfigFile { entries: HashMap::new(), path: String::new() });
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { entries, path: path.display().to_string() })
    }

    /// Flag value wins; otherwise the file entry, parsed.
    fn pick<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>, String> {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.entries.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("{}: bad value for {key}: {raw}", self.path)),
            None => Ok(None),
        }
    }
}

fn build_config(args: &RunArgs) -> Result<WorkloadConfig, String> {
    let file = ConfigFile::load(args.config.as_ref())?;
    let mut cfg = WorkloadConfig::default();
    if let Some(v) = file.pick(&args.actors, "actors")? {
        cfg.num_actors = v;
    }
    if let Some(v) = file.pick(&args.shards, "shards")? {
        cfg.shards = v;
    }
    if let Some(v) = file.pick(&args.space_km2, "space_km2")? {
        cfg.space_km2 = v;
    }
    if let Some(v) = file.pick(&args.cells, "cells")? {
        cfg.cells = v;
    }
    if let Some(v) = file.pick(&args.hotspots, "hotspots")? {
        cfg.hotspots = v;
    }
    if let Some(v) = file.pick(&args.sensing_pct, "sensing_pct")? {
        cfg.sensing_pct = v;
    }
    if let Some(v) = file.pick(&args.query_ratio, "query_ratio")? {
        cfg.query_ratio = v;
    }
    if let Some(v) = file.pick(&args.duration_s, "duration_s")? {
        cfg.duration_s = v;
    }
    if let Some(v) = file.pick(&args.seed, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = file.pick(&args.snapshot_interval_ms, "snapshot_interval_ms")? {
        cfg.snapshot_interval_ms = v;
    }
    if let Some(v) = file.pick(&args.clients_per_shard, "clients_per_shard")? {
        cfg.clients_per_shard = v;
    }
    if let Some(v) = file.pick(&args.move_period_ms, "move_period_ms")? {
        cfg.move_period_ms = v;
    }
    if let Some(v) = file.pick(&args.fence_m, "fence_m")? {
        cfg.fence_side = v;
    }
    if let Some(v) = file.pick(&args.query_m, "query_m")? {
        cfg.query_side = v;
    }
    if let Some(v) = file.pick(&args.fixed_speed, "fixed_speed")? {
        cfg.fixed_speed = v;
    }
    if let Some(v) = file.pick(&args.threads_per_shard, "threads_per_shard")? {
        cfg.threads_per_shard = v;
    }
    if let Some(v) = file.pick(&args.max_speed_kmh, "max_speed_kmh")? {
        cfg.max_speed = v / 3.6;
    }
    if let Some(v) = file.pick(&args.cross_shard_latency_us, "cross_shard_latency_us")? {
        cfg.cross_shard_latency = Duration::from_micros(v);
    }
    if let Some(v) = file.pick(&args.sigma_m, "sigma_m")? {
        cfg.sigma = Some(v);
    }
    if let Some(v) = file.pick(&args.semantics, "semantics")? {
        cfg.semantics = Semantics::parse(&v).ok_or_else(|| format!("unknown semantics {v}"))?;
    }
    if let Some(v) = file.pick(&args.model, "model")? {
        cfg.model = Model::parse(&v).ok_or_else(|| format!("unknown model {v}"))?;
    }
    if let Some(v) = file.pick(&args.placement, "placement")? {
        cfg.placement = PlacementKind::parse(&v).ok_or_else(|| format!("unknown placement {v}"))?;
    }
    if let Some(v) = file.pick(&args.pace, "pace")? {
        cfg.pace = match v.as_str() {
            "period" => Pace::Period,
            "asap" => Pace::Asap,
            other => return Err(format!("unknown pace {other}")),
        };
    }
    if let Some(v) = file.pick(&args.road_file.clone().map(|p| p.display().to_string()), "road_file")? {
        cfg.road_file = Some(PathBuf::from(v));
    }
    cfg.verify =
        args.verify || file.entries.get("verify").map(|v| v == "true" || v == "1").unwrap_or(false);
    Ok(cfg)
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Trace file produced by `run --trace`.
    #[arg(long)]
    trace: PathBuf,
    /// Space size the trace was recorded under.
    #[arg(long, default_value_t = 25.0)]
    space_km2: f64,
    /// Cell count the trace was recorded under.
    #[arg(long, default_value_t = 25)]
    cells: u32,
}

#[derive(clap::Args)]
struct GenGraphArgs {
    #[arg(long, default_value_t = 20)]
    rows: u32,
    #[arg(long, default_value_t = 20)]
    cols: u32,
    #[arg(long, default_value_t = 25.0)]
    space_km2: f64,
    /// Output path for the road graph file.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_run(args: &RunArgs) -> Result<(), String> {
    let cfg = build_config(args)?;
    eprintln!("running: {}", cfg.describe());
    let outcome = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    println!("{}", outcome.report.render_text());
    if cfg.verify {
        for (name, v) in &outcome.oracle_verdicts {
            let status = if v.is_pass() { "pass" } else { "FAIL" };
            println!(
                "oracle {name}: {status} ({} checks, {} ambiguous){}",
                v.checks,
                v.ambiguous,
                v.witness.as_deref().map(|w| format!(" - {w}")).unwrap_or_default()
            );
        }
        if outcome.oracle_verdicts.iter().any(|(_, v)| !v.is_pass()) {
            return Err("oracle reported failures".into());
        }
    }
    if let Some(path) = &args.out_csv {
        outcome.report.emit_csv(path).map_err(|e| e.to_string())?;
        eprintln!("appended metrics to {}", path.display());
    }
    if let Some(path) = &args.trace {
        trace::write_trace(path, &outcome.trace).map_err(|e| e.to_string())?;
        eprintln!("wrote {} trace events to {}", outcome.trace.len(), path.display());
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), String> {
    let events = trace::read_trace(&args.trace).map_err(|e| e.to_string())?;
    let side = (args.space_km2 * 1e6).sqrt();
    let per_axis = (args.cells as f64).sqrt().round().max(1.0) as u32;
    let grid =
        roam_core::GridConfig::new(roam_core::Point::new(0.0, 0.0), side, side, per_axis, per_axis)
            .map_err(|e| e.to_string())?;
    let (pass, fraction, verdicts) = oracle::verify_trace(&events, &grid).map_err(|e| e.to_string())?;
    for (name, v) in &verdicts {
        let status = if v.is_pass() { "pass" } else { "FAIL" };
        println!(
            "{name}: {status} ({} checks, {} ambiguous){}",
            v.checks,
            v.ambiguous,
            v.witness.as_deref().map(|w| format!(" - {w}")).unwrap_or_default()
        );
    }
    println!("ambiguous fraction: {fraction:.4}");
    if pass {
        println!("verdict: pass");
        Ok(())
    } else {
        Err("verdict: FAIL".into())
    }
}

fn cmd_gen_graph(args: &GenGraphArgs) -> Result<(), String> {
    let side = (args.space_km2 * 1e6).sqrt();
    let text = lattice_road_graph_text(args.rows, args.cols, side, side);
    std::fs::write(&args.out, &text).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    println!(
        "wrote {} nodes / {} edges lattice to {}",
        args.rows * args.cols,
        args.rows * (args.cols - 1) + args.cols * (args.rows - 1),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::GenGraph(args) => cmd_gen_graph(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
