//! Assembles the kernel, the spatial actors, and the snapshot machinery into
//! a runnable platform and exposes the moving-actor operations to clients.

use std::collections::HashMap;
use std::sync::atomic::AtomicU64;
use std::sync::Arc;
use std::time::Duration;

use roam_core::grid::{CellId, GridConfig, PlacementMap};
use roam_core::{Envelope, Nanos, Point, Predicate};

use crate::kernel::{
    ActorId, ActorKind, Factory, Kernel, KernelConfig, KernelError, Router, TimerId,
};
use crate::moving::MovingActor;
use crate::protocol::{
    ErrorCounters, Msg, OpError, Proto, ReactionCallback, Reply, Semantics, Shared,
};
use crate::snapshot::{ControllerActor, SuaActor};
use crate::spatial::{IndexActor, MonitorActor};
use crate::trace::{TraceEvent, TraceSink};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("unexpected reply: {0}")]
    UnexpectedReply(String),
}

/// Everything needed to start a platform instance.
pub struct PlatformInit {
    pub grid: GridConfig,
    pub semantics: Semantics,
    pub placement: PlacementMap,
    pub initial_positions: Vec<Point>,
    pub fence_side: f64,
    pub snapshot_interval: Duration,
    pub timer_jitter: Duration,
    pub query_retry_limit: u32,
    pub threads_per_shard: usize,
    pub cross_shard_latency: Duration,
    pub max_clock_skew: Duration,
    pub seed: u64,
    /// Trailing actors left out of the initial seeding: they join the system
    /// when they first move and flush (Snapshot mode), becoming residents of
    /// their cell at the following epoch.
    pub deferred_actors: u64,
}

impl PlatformInit {
    pub fn new(
        grid: GridConfig,
        semantics: Semantics,
        placement: PlacementMap,
        initial_positions: Vec<Point>,
    ) -> Self {
        PlatformInit {
            grid,
            semantics,
            placement,
            initial_positions,
            fence_side: 1000.0,
            snapshot_interval: Duration::from_secs(1),
            timer_jitter: Duration::from_millis(10),
            query_retry_limit: 5,
            threads_per_shard: 2,
            cross_shard_latency: Duration::ZERO,
            max_clock_skew: Duration::ZERO,
            seed: 0,
            deferred_actors: 0,
        }
    }
}

pub struct Platform {
    kernel: Kernel<Proto>,
    shared: Arc<Shared>,
    timers: Vec<TimerId>,
    num_actors: u64,
    deferred: u64,
}

impl Platform {
    /// Builds the kernel, seeds the per-cell indexes (and, under Snapshot
    /// semantics, the resident sets, the controller, and the flush timers),
    /// and returns once the system is ready for client requests.
    pub async fn start(init: PlatformInit) -> Result<Platform, EngineError> {
        let shards = init.placement.num_shards();
        let trace = TraceSink::new(shards);
        let kernel_cfg = KernelConfig {
            shards,
            threads_per_shard: init.threads_per_shard,
            cross_shard_latency: init.cross_shard_latency,
            max_clock_skew: init.max_clock_skew,
            seed: init.seed,
        };

        // Moving actors live on the shard owning their initial cell; cell
        // actors live on the shard owning their cell.
        let grid = init.grid;
        let placement = init.placement.clone();
        let mut moving_homes: Vec<u32> = Vec::with_capacity(init.initial_positions.len());
        for p in &init.initial_positions {
            let cell = grid.cell_of(*p).map_err(|_| OpError::OutOfBounds)?;
            moving_homes.push(placement.shard_of(cell));
        }
        let homes = Arc::new(moving_homes);
        let router_homes = Arc::clone(&homes);
        let router: Router = Box::new(move |id: ActorId| match id.kind {
            ActorKind::Moving => router_homes.get(id.key as usize).copied().unwrap_or(0),
            ActorKind::Index | ActorKind::Monitor | ActorKind::SnapshotUpdate => {
                placement.shard_of(CellId(id.key as u32))
            }
            ActorKind::SnapshotController => 0,
        });

        let clock = crate::kernel::Clock::new(shards, kernel_cfg.max_clock_skew, kernel_cfg.seed);
        let init_time = clock.now();
        let num_actors = init.initial_positions.len() as u64;
        let shared = Arc::new(Shared {
            grid,
            semantics: init.semantics,
            fence_side: init.fence_side,
            snapshot_interval: init.snapshot_interval,
            timer_jitter: init.timer_jitter,
            query_retry_limit: init.query_retry_limit,
            initial_positions: init.initial_positions,
            init_time,
            qid: AtomicU64::new(0),
            errors: ErrorCounters::default(),
        });

        let mut factories: HashMap<ActorKind, Factory<Proto>> = HashMap::new();
        {
            let s = Arc::clone(&shared);
            factories.insert(ActorKind::Moving, Box::new(move |id| Box::new(MovingActor::new(id, Arc::clone(&s)))));
        }
        {
            let s = Arc::clone(&shared);
            factories.insert(ActorKind::Index, Box::new(move |_| Box::new(IndexActor::new(Arc::clone(&s)))));
        }
        factories.insert(ActorKind::Monitor, Box::new(|id| Box::new(MonitorActor::new(id))));
        {
            let s = Arc::clone(&shared);
            factories.insert(ActorKind::SnapshotUpdate, Box::new(move |id| Box::new(SuaActor::new(id, Arc::clone(&s)))));
        }
        {
            let s = Arc::clone(&shared);
            factories.insert(ActorKind::SnapshotController, Box::new(move |_| Box::new(ControllerActor::new(Arc::clone(&s)))));
        }

        let kernel = Kernel::start_with_clock(kernel_cfg, router, factories, trace, clock);
        let platform = Platform { kernel, shared, timers: Vec::new(), num_actors, deferred: init.deferred_actors };
        platform.seed().await?;
        Ok(platform)
    }

    async fn seed(&self) -> Result<(), EngineError> {
        let shared = &self.shared;
        let grid = &shared.grid;
        // Group initial positions per cell.
        let seeded = self.num_actors - self.deferred;
        let mut per_cell: HashMap<CellId, Vec<(ActorId, Point)>> = HashMap::new();
        for (key, p) in shared.initial_positions.iter().take(seeded as usize).enumerate() {
            let cell = grid.cell_of(*p).map_err(|_| OpError::OutOfBounds)?;
            per_cell.entry(cell).or_default().push((ActorId::moving(key as u64), *p));
        }
        let mut pending = Vec::new();
        for (cell, entries) in &per_cell {
            pending.push(self.kernel.send(ActorId::index(*cell), Msg::IndexSeed { entries: entries.clone() }));
        }
        for p in pending {
            expect_ack(p.recv().await?)?;
        }
        // Initial locations count as each actor's first completed update.
        for (key, p) in shared.initial_positions.iter().take(seeded as usize).enumerate() {
            self.kernel.trace_sink().push(
                None,
                TraceEvent::new(
                    shared.init_time,
                    ActorId::moving(key as u64),
                    crate::trace::TracePayload::MoveDone { from: *p, to: *p },
                ),
            );
        }
        if shared.semantics == Semantics::Snapshot {
            let mut pending = Vec::new();
            for id in 0..grid.cell_count() {
                let cell = CellId(id);
                let residents: Vec<ActorId> =
                    per_cell.get(&cell).map(|v| v.iter().map(|(a, _)| *a).collect()).unwrap_or_default();
                pending.push(self.kernel.send(ActorId::snapshot_update(cell), Msg::SuaSeed { residents }));
            }
            let active: Vec<CellId> = per_cell.keys().copied().collect();
            pending.push(self.kernel.send(ActorId::controller(), Msg::CtrlSeed { active }));
            for p in pending {
                expect_ack(p.recv().await?)?;
            }
        }
        Ok(())
    }

    /// Registers the per-actor flush timers (Snapshot mode). Separate from
    /// `start` so tests can drive flushes manually.
    pub fn start_flush_timers(&mut self) {
        if self.shared.semantics != Semantics::Snapshot {
            return;
        }
        for key in 0..self.num_actors {
            let id = self.kernel.register_timer(
                ActorId::moving(key),
                self.shared.snapshot_interval,
                self.shared.timer_jitter,
            );
            self.timers.push(id);
        }
    }

    pub fn stop_flush_timers(&mut self) {
        for t in self.timers.drain(..) {
            self.kernel.cancel_timer(t);
        }
    }

    pub fn kernel(&self) -> &Kernel<Proto> {
        &self.kernel
    }

    pub fn shared(&self) -> &Arc<Shared> {
        &self.shared
    }

    pub fn num_actors(&self) -> u64 {
        self.num_actors
    }

    pub async fn move_actor(&self, key: u64, dest: Point) -> Result<Nanos, EngineError> {
        match self.kernel.send(ActorId::moving(key), Msg::Move { dest }).recv().await? {
            Reply::AckAt { time } => Ok(time),
            Reply::Err(e) => Err(e.into()),
            other => Err(EngineError::UnexpectedReply(format!("{other:?}"))),
        }
    }

    pub async fn find_actors(
        &self,
        key: u64,
        range: Envelope,
    ) -> Result<(Vec<(ActorId, Point)>, u32), EngineError> {
        match self.kernel.send(ActorId::moving(key), Msg::FindActors { range }).recv().await? {
            Reply::Found { entries, retries, .. } => Ok((entries, retries)),
            Reply::Err(e) => Err(e.into()),
            other => Err(EngineError::UnexpectedReply(format!("{other:?}"))),
        }
    }

    pub async fn start_sensing(
        &self,
        key: u64,
        predicate: Predicate,
        callback: Option<ReactionCallback>,
    ) -> Result<(), EngineError> {
        self.start_sensing_offset(key, predicate, (0.0, 0.0), callback).await
    }

    pub async fn start_sensing_offset(
        &self,
        key: u64,
        predicate: Predicate,
        fence_offset: (f64, f64),
        callback: Option<ReactionCallback>,
    ) -> Result<(), EngineError> {
        let msg = Msg::StartSensing { predicate, fence_offset, callback };
        match self.kernel.send(ActorId::moving(key), msg).recv().await? {
            Reply::Ack => Ok(()),
            Reply::Err(e) => Err(e.into()),
            other => Err(EngineError::UnexpectedReply(format!("{other:?}"))),
        }
    }

    pub async fn end_sensing(&self, key: u64) -> Result<(), EngineError> {
        match self.kernel.send(ActorId::moving(key), Msg::EndSensing).recv().await? {
            Reply::Ack => Ok(()),
            Reply::Err(e) => Err(e.into()),
            other => Err(EngineError::UnexpectedReply(format!("{other:?}"))),
        }
    }

    /// Full index contents of one cell (test and verification helper).
    pub async fn dump_cell(&self, cell: CellId) -> Result<(Vec<(ActorId, Point)>, u64), EngineError> {
        let window = self.shared.grid.cell_extent(cell);
        match self.kernel.send(ActorId::index(cell), Msg::IndexLookup { window }).recv().await? {
            Reply::Lookup { entries, version } => Ok((entries, version)),
            other => Err(EngineError::UnexpectedReply(format!("{other:?}"))),
        }
    }

    pub async fn quiesce(&self, max_wait: Duration) -> Result<(), KernelError> {
        self.kernel.quiesce(max_wait).await
    }

    /// Stops timers, drains in-flight work, shuts the kernel down, and
    /// returns the time-sorted trace.
    pub async fn shutdown(mut self) -> Vec<TraceEvent> {
        self.stop_flush_timers();
        let _ = self.kernel.quiesce(Duration::from_secs(30)).await;
        let trace = self.kernel.trace_sink().drain_sorted();
        self.kernel.stop();
        trace
    }
}

fn expect_ack(reply: Reply) -> Result<(), EngineError> {
    match reply {
        Reply::Ack | Reply::AckAt { .. } => Ok(()),
        Reply::Err(e) => Err(e.into()),
        other => Err(EngineError::UnexpectedReply(format!("{other:?}"))),
    }
}
