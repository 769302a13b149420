//! Benchmark harness: spawns the platform, drives it with closed-loop client
//! workers, and aggregates latency/throughput metrics plus the execution
//! trace.
//!
//! Clients issue a fixed, seed-determined schedule of requests (so move
//! counts and trajectories replay identically), either paced to the per-actor
//! move period or as fast as possible.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roam_core::grid::{build_placement, GridConfig, PlacementMap};
use roam_core::{Envelope, Point, Predicate};

use crate::metrics::{MetricsReport, OpStats};
use crate::platform::{EngineError, Platform, PlatformInit};
use crate::protocol::{OpError, Semantics};
use crate::trace::{TraceEvent, TracePayload};
use crate::workload::{self, HotspotField, Model, RoadGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementKind {
    /// KD split of the grid on the initial actor density.
    Spatial,
    /// Cells scattered across shards at random.
    Random,
}

impl PlacementKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spatial" => Some(PlacementKind::Spatial),
            "random" => Some(PlacementKind::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pace {
    /// Each actor is driven once per move period (wall clock).
    Period,
    /// No pacing: requests go out back to back.
    Asap,
}

#[derive(Debug, Clone)]
pub struct WorkloadConfig {
    pub model: Model,
    pub num_actors: u64,
    pub space_km2: f64,
    pub cells: u32,
    pub shards: u32,
    pub placement: PlacementKind,
    pub semantics: Semantics,
    pub snapshot_interval_ms: u64,
    pub max_speed: f64,
    pub fence_side: f64,
    pub query_side: f64,
    pub sensing_pct: f64,
    pub query_ratio: f64,
    pub hotspots: usize,
    pub sigma: Option<f64>,
    pub road_file: Option<std::path::PathBuf>,
    pub lattice: (u32, u32),
    pub fixed_speed: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub clients_per_shard: u32,
    pub move_period_ms: u64,
    pub pace: Pace,
    pub threads_per_shard: usize,
    pub cross_shard_latency: Duration,
    pub verify: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            model: Model::Uniform,
            num_actors: 500,
            space_km2: 25.0,
            cells: 25,
            shards: 1,
            placement: PlacementKind::Spatial,
            semantics: Semantics::Fresh,
            snapshot_interval_ms: 1000,
            max_speed: 80.0 / 3.6,
            fence_side: 1000.0,
            query_side: 1000.0,
            sensing_pct: 0.125,
            query_ratio: 0.0,
            hotspots: 8,
            sigma: None,
            road_file: None,
            lattice: (20, 20),
            fixed_speed: 22.0,
            seed: 1,
            duration_s: 10.0,
            clients_per_shard: 2,
            move_period_ms: 500,
            pace: Pace::Period,
            threads_per_shard: 2,
            cross_shard_latency: Duration::ZERO,
            verify: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Grid(#[from] roam_core::GridError),
    #[error(transparent)]
    Graph(#[from] workload::GraphError),
    #[error("oracle: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
}

impl WorkloadConfig {
    pub fn grid(&self) -> Result<GridConfig, BenchError> {
        let side = (self.space_km2 * 1e6).sqrt();
        let per_axis = (self.cells as f64).sqrt().round().max(1.0) as u32;
        GridConfig::new(Point::new(0.0, 0.0), side, side, per_axis, per_axis)
            .map_err(BenchError::Grid)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if self.num_actors == 0 {
            return bad("num_actors must be positive");
        }
        if !(0.0..=1.0).contains(&self.sensing_pct) || !(0.0..=1.0).contains(&self.query_ratio) {
            return bad("sensing_pct and query_ratio must lie in [0, 1]");
        }
        if self.max_speed <= 0.0 || self.fixed_speed <= 0.0 {
            return bad("speeds must be positive");
        }
        if self.duration_s <= 0.0 || self.move_period_ms == 0 {
            return bad("duration and move period must be positive");
        }
        if self.model == Model::Gaussian && self.hotspots == 0 {
            return bad("gaussian model needs at least one hotspot");
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "model={} actors={} space_km2={} cells={} shards={} placement={:?} semantics={} interval_ms={} \
             max_speed={} fence={} query={} sensing={} ratio={} hotspots={} seed={} duration={} \
             clients={} period_ms={} pace={:?}",
            self.model.name(),
            self.num_actors,
            self.space_km2,
            self.cells,
            self.shards,
            self.placement,
            self.semantics.name(),
            self.snapshot_interval_ms,
            self.max_speed,
            self.fence_side,
            self.query_side,
            self.sensing_pct,
            self.query_ratio,
            self.hotspots,
            self.seed,
            self.duration_s,
            self.clients_per_shard,
            self.move_period_ms,
            self.pace,
        )
    }
}

enum Generator {
    Uniform(workload::FreeState),
    Gaussian { state: workload::FreeState, field: Arc<HotspotField>, max_speed: f64 },
    Road { state: workload::RoadState, graph: Arc<RoadGraph>, speed: f64 },
}

impl Generator {
    fn pos(&self) -> Point {
        match self {
            Generator::Uniform(s) => s.pos,
            Generator::Gaussian { state, .. } => state.pos,
            Generator::Road { state, .. } => state.pos,
        }
    }

    fn step(&mut self, grid: &GridConfig, dt: f64) -> Point {
        match self {
            Generator::Uniform(s) => s.step_uniform(grid, dt),
            Generator::Gaussian { state, field, max_speed } => {
                state.step_gaussian_field(grid, dt, field, *max_speed)
            }
            Generator::Road { state, graph, speed } => state.step(graph, *speed, dt),
        }
    }
}

fn build_generators(cfg: &WorkloadConfig, grid: &GridConfig) -> Result<Vec<Generator>, BenchError> {
    match cfg.model {
        Model::Uniform => Ok((0..cfg.num_actors)
            .map(|a| Generator::Uniform(workload::FreeState::init_uniform(grid, cfg.max_speed, cfg.seed, a)))
            .collect()),
        Model::Gaussian => {
            let hotspots = workload::make_hotspots(grid, cfg.hotspots, cfg.seed);
            let sigma = cfg.sigma.unwrap_or_else(|| workload::default_sigma(grid, cfg.hotspots));
            let field = Arc::new(HotspotField::new(&hotspots, sigma));
            Ok((0..cfg.num_actors)
                .map(|a| Generator::Gaussian {
                    state: workload::FreeState::init_gaussian(grid, &hotspots, sigma, cfg.seed, a),
                    field: Arc::clone(&field),
                    max_speed: cfg.max_speed,
                })
                .collect())
        }
        Model::RoadNet => {
            let graph = match &cfg.road_file {
                Some(path) => workload::load_road_graph(path, grid)?,
                None => {
                    let space = grid.space();
                    let text = workload::lattice_road_graph_text(
                        cfg.lattice.0,
                        cfg.lattice.1,
                        space.max.x - space.min.x,
                        space.max.y - space.min.y,
                    );
                    workload::parse_road_graph(&text, grid)?
                }
            };
            let graph = Arc::new(graph);
            Ok((0..cfg.num_actors)
                .map(|a| Generator::Road {
                    state: workload::RoadState::init(&graph, cfg.seed, a),
                    graph: Arc::clone(&graph),
                    speed: cfg.fixed_speed,
                })
                .collect())
        }
    }
}

fn make_placement(
    cfg: &WorkloadConfig,
    grid: &GridConfig,
    positions: &[Point],
) -> Result<PlacementMap, BenchError> {
    match cfg.placement {
        PlacementKind::Spatial => {
            let mut weights = vec![0.0f64; grid.cell_count() as usize];
            for p in positions {
                weights[grid.cell_of(*p).map_err(BenchError::Grid)?.0 as usize] += 1.0;
            }
            Ok(build_placement(grid, cfg.shards, &weights)?)
        }
        PlacementKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9a9d);
            let assignments: Vec<u32> =
                (0..grid.cell_count()).map(|_| rng.gen_range(0..cfg.shards)).collect();
            Ok(PlacementMap::from_assignments(assignments, cfg.shards)?)
        }
    }
}

#[derive(Default)]
struct ClientCounters {
    moves: Vec<Duration>,
    queries: Vec<Duration>,
    retries: u64,
    unstable: u64,
    errors: u64,
}

async fn client_loop(
    platform: Arc<Platform>,
    grid: GridConfig,
    mut actors: Vec<(u64, Generator)>,
    cfg: WorkloadConfig,
    client_idx: u64,
    rounds: u64,
) -> ClientCounters {
    let mut out = ClientCounters::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ client_idx.wrapping_mul(0x5851_f42d_4c95_7f2d));
    let dt = cfg.move_period_ms as f64 / 1e3;
    let period = Duration::from_millis(cfg.move_period_ms);
    let start = tokio::time::Instant::now();
    let space = grid.space();
    for round in 0..rounds {
        for (key, gen) in actors.iter_mut() {
            let is_query = cfg.query_ratio > 0.0 && rng.gen_bool(cfg.query_ratio);
            if is_query {
                let c = gen.pos();
                let h = cfg.query_side / 2.0;
                let range = Envelope::new(
                    Point::new((c.x - h).max(space.min.x), (c.y - h).max(space.min.y)),
                    Point::new((c.x + h).min(space.max.x), (c.y + h).min(space.max.y)),
                );
                let t0 = Instant::now();
                match platform.find_actors(*key, range).await {
                    Ok((_, retries)) => {
                        out.queries.push(t0.elapsed());
                        out.retries += retries as u64;
                    }
                    Err(EngineError::Op(OpError::SnapshotUnstable)) => out.unstable += 1,
                    Err(_) => out.errors += 1,
                }
            } else {
                let dest = gen.step(&grid, dt);
                let t0 = Instant::now();
                match platform.move_actor(*key, dest).await {
                    Ok(_) => out.moves.push(t0.elapsed()),
                    Err(_) => out.errors += 1,
                }
            }
        }
        if cfg.pace == Pace::Period {
            tokio::time::sleep_until(start + period * (round as u32 + 1)).await;
        }
    }
    out
}

pub struct BenchOutcome {
    pub report: MetricsReport,
    pub trace: Vec<TraceEvent>,
    pub oracle_verdicts: Vec<(&'static str, crate::oracle::Verdict)>,
}

/// Runs one benchmark: platform up, sensing enabled on the configured
/// fraction, clients through their schedules, drain, and report.
pub fn run_benchmark(cfg: &WorkloadConfig) -> Result<BenchOutcome, BenchError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let generators = build_generators(cfg, &grid)?;
    let positions: Vec<Point> = generators.iter().map(|g| g.pos()).collect();
    let placement = make_placement(cfg, &grid, &positions)?;

    let total_clients = (cfg.shards * cfg.clients_per_shard).max(1) as u64;
    let rounds = (cfg.duration_s * 1e3 / cfg.move_period_ms as f64).ceil() as u64;

    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads((total_clients as usize).clamp(1, 4))
        .enable_time()
        .build()
        .expect("client runtime");

    rt.block_on(async move {
        let mut init = PlatformInit::new(grid, cfg.semantics, placement, positions);
        init.fence_side = cfg.fence_side;
        init.snapshot_interval = Duration::from_millis(cfg.snapshot_interval_ms);
        init.threads_per_shard = cfg.threads_per_shard;
        init.cross_shard_latency = cfg.cross_shard_latency;
        init.seed = cfg.seed;
        let mut platform = Platform::start(init).await?;

        let sensors = (cfg.sensing_pct * cfg.num_actors as f64).floor() as u64;
        for key in 0..sensors {
            platform.start_sensing(key, Predicate::Cross, None).await?;
        }
        platform.start_flush_timers();
        let platform = Arc::new(platform);

        // Partition actors across clients in contiguous chunks.
        let mut chunks: Vec<Vec<(u64, Generator)>> = (0..total_clients).map(|_| Vec::new()).collect();
        for (key, gen) in generators.into_iter().enumerate() {
            chunks[key as u64 as usize % total_clients as usize].push((key as u64, gen));
        }
        let bench_start = Instant::now();
        let mut handles = Vec::new();
        for (idx, chunk) in chunks.into_iter().enumerate() {
            handles.push(tokio::spawn(client_loop(
                Arc::clone(&platform),
                grid,
                chunk,
                cfg.clone(),
                idx as u64,
                rounds,
            )));
        }
        let mut counters = ClientCounters::default();
        for h in handles {
            let c = h.await.expect("client task");
            counters.moves.extend(c.moves);
            counters.queries.extend(c.queries);
            counters.retries += c.retries;
            counters.unstable += c.unstable;
            counters.errors += c.errors;
        }
        let elapsed = bench_start.elapsed();

        // Let the final snapshot round(s) absorb the tail of the run.
        if cfg.semantics == Semantics::Snapshot {
            tokio::time::sleep(Duration::from_millis(cfg.snapshot_interval_ms * 3 / 2)).await;
        }
        let _ = platform.quiesce(Duration::from_secs(30)).await;
        let platform = Arc::into_inner(platform).expect("all clients joined");
        let trace = platform.shutdown().await;

        // Reaction metrics come from the trace.
        let mut reaction_samples: Vec<Duration> = Vec::new();
        let mut rounds_applied: std::collections::BTreeSet<u64> = Default::default();
        let mut retries_traced = 0u64;
        for ev in &trace {
            match &ev.payload {
                TracePayload::ReactionFired { mover_t_u, .. } => {
                    reaction_samples.push(Duration::from_nanos(ev.time.saturating_sub(*mover_t_u)));
                }
                TracePayload::SnapshotApplied { epoch, .. } => {
                    rounds_applied.insert(*epoch);
                }
                TracePayload::QueryEnd { retries, .. } => retries_traced += *retries as u64,
                _ => {}
            }
        }
        let _ = retries_traced;

        let (verdicts, ambiguous_fraction) = if cfg.verify {
            let (_pass, fraction, verdicts) = crate::oracle::verify_trace(&trace, &grid)?;
            (verdicts, fraction)
        } else {
            (Vec::new(), f64::NAN)
        };

        let report = MetricsReport {
            semantics: cfg.semantics.name().to_string(),
            model: cfg.model.name().to_string(),
            shards: cfg.shards,
            actors: cfg.num_actors,
            cells: grid.cell_count(),
            snapshot_interval_ms: if cfg.semantics == Semantics::Snapshot {
                cfg.snapshot_interval_ms
            } else {
                0
            },
            sensing_pct: cfg.sensing_pct,
            query_ratio: cfg.query_ratio,
            seed: cfg.seed,
            duration_s: cfg.duration_s,
            moves: OpStats::from_samples(&counters.moves, elapsed),
            queries: OpStats::from_samples(&counters.queries, elapsed),
            reactions: OpStats::from_samples(&reaction_samples, elapsed),
            snapshot_rounds: rounds_applied.len() as u64,
            query_retries: counters.retries,
            query_unstable: counters.unstable,
            ambiguous_fraction,
            config_hash: MetricsReport::config_hash_of(&cfg.describe()),
            wall_elapsed: elapsed,
        };
        Ok(BenchOutcome { report, trace, oracle_verdicts: verdicts })
    })
}
