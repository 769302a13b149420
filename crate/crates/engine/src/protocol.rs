//! Message and reply types exchanged between the platform's actors, plus the
//! shared run-wide state handed to every actor factory.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use roam_core::grid::{CellId, GridConfig};
use roam_core::{Envelope, Itinerary, Nanos, Point, Predicate};

use crate::kernel::{ActorId, Protocol, TimerId};

/// Concurrency semantics of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    /// Queries and reactions see updates as soon as each move completes.
    Fresh,
    /// Moves buffer locally; queries and reactions see periodic, globally
    /// versioned snapshots.
    Snapshot,
}

impl Semantics {
    pub fn name(&self) -> &'static str {
        match self {
            Semantics::Fresh => "fresh",
            Semantics::Snapshot => "snap",
        }
    }

    pub fn parse(s: &str) -> Option<Semantics> {
        match s {
            "fresh" => Some(Semantics::Fresh),
            "snap" | "snapshot" => Some(Semantics::Snapshot),
            _ => None,
        }
    }
}

/// A movement published for reactive sensing: one hop under Fresh semantics,
/// a whole buffered epoch itinerary under Snapshot semantics.
#[derive(Debug, Clone)]
pub struct MoveUpdate {
    pub mover: ActorId,
    pub itinerary: Itinerary,
    /// Completion time of the newest move in the itinerary.
    pub t_u: Nanos,
    /// Snapshot epoch the update belongs to; `None` under Fresh semantics.
    pub epoch: Option<u64>,
}

/// Invocation record passed to a sensing actor's reaction callback.
#[derive(Debug, Clone)]
pub struct ReactionEvent {
    pub sensor: ActorId,
    pub mover: ActorId,
    pub mover_t_u: Nanos,
    pub trigger_time: Nanos,
    pub epoch: Option<u64>,
}

/// Application-defined reaction body. The platform records the reaction in
/// the trace either way; the callback runs inside the sensor's mailbox turn.
#[derive(Clone)]
pub struct ReactionCallback(pub Arc<dyn Fn(&ReactionEvent) + Send + Sync>);

impl fmt::Debug for ReactionCallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ReactionCallback(..)")
    }
}

#[derive(Debug, Clone)]
pub enum Msg {
    // Moving actor operations.
    Move { dest: Point },
    FindActors { range: Envelope },
    StartSensing { predicate: Predicate, fence_offset: (f64, f64), callback: Option<ReactionCallback> },
    EndSensing,
    Timer(TimerId),
    /// Broadcast delivery from a cell's monitor channel.
    Stream { updates: Vec<MoveUpdate> },

    // Indexing actor.
    IndexSeed { entries: Vec<(ActorId, Point)> },
    IndexUpdate { actor: ActorId, old: Option<Point>, new: Option<Point> },
    IndexLookup { window: Envelope },
    IndexApply { updates: Vec<(ActorId, Option<Point>)>, version: u64 },

    // Monitoring actor.
    Relay { update: MoveUpdate },
    Distribute { epoch: u64, updates: Vec<MoveUpdate> },

    // Snapshot update actor.
    SuaSeed { residents: Vec<ActorId> },
    Flush { actor: ActorId, itinerary: Itinerary },
    RoundReply { epoch: u64, expected: Vec<CellId> },
    Arrivals { from: CellId, epoch: u64, actors: Vec<(ActorId, Point)> },
    VersionSync { epoch: u64 },
    JoinRound { epoch: u64 },

    // Snapshot controller.
    CtrlSeed { active: Vec<CellId> },
    Announce { cell: CellId, epoch: u64, dests: Vec<CellId> },
    Applied { cell: CellId, epoch: u64, residents: u32 },
    Register { cell: CellId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ack,
    /// Acknowledgment carrying the local completion time of the mutation.
    AckAt { time: Nanos },
    Lookup { entries: Vec<(ActorId, Point)>, version: u64 },
    Found { entries: Vec<(ActorId, Point)>, versions: Vec<(CellId, u64)>, retries: u32 },
    Err(OpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OpError {
    #[error("point or range outside the space")]
    OutOfBounds,
    #[error("snapshot versions failed to stabilize after retries")]
    SnapshotUnstable,
    #[error("index version gap: expected {expected}, got {got}")]
    VersionGap { expected: u64, got: u64 },
    #[error("duplicate flush for the same epoch")]
    DuplicateFlush,
    #[error("announcement for a stale round")]
    StaleRound,
}

/// Marker type wiring [`Msg`]/[`Reply`] into the kernel.
pub struct Proto;

impl Protocol for Proto {
    type Msg = Msg;
    type Reply = Reply;

    fn timer_msg(timer: TimerId) -> Msg {
        Msg::Timer(timer)
    }
}

/// Counters for protocol violations surfaced as metrics rather than crashes.
#[derive(Debug, Default)]
pub struct ErrorCounters {
    pub version_gap: AtomicU64,
    pub duplicate_flush: AtomicU64,
    pub stale_round: AtomicU64,
    pub stale_reaction_drop: AtomicU64,
    pub out_of_bounds: AtomicU64,
}

impl ErrorCounters {
    pub fn bump(&self, err: OpError) {
        match err {
            OpError::VersionGap { .. } => self.version_gap.fetch_add(1, Ordering::Relaxed),
            OpError::DuplicateFlush => self.duplicate_flush.fetch_add(1, Ordering::Relaxed),
            OpError::StaleRound => self.stale_round.fetch_add(1, Ordering::Relaxed),
            OpError::OutOfBounds => self.out_of_bounds.fetch_add(1, Ordering::Relaxed),
            OpError::SnapshotUnstable => 0,
        };
    }

    pub fn total_protocol_errors(&self) -> u64 {
        self.version_gap.load(Ordering::Relaxed)
            + self.duplicate_flush.load(Ordering::Relaxed)
            + self.stale_round.load(Ordering::Relaxed)
    }
}

/// Immutable run configuration plus shared counters, cloned into every actor.
pub struct Shared {
    pub grid: GridConfig,
    pub semantics: Semantics,
    pub fence_side: f64,
    pub snapshot_interval: Duration,
    pub timer_jitter: Duration,
    pub query_retry_limit: u32,
    /// Initial location per moving-actor key.
    pub initial_positions: Vec<Point>,
    pub init_time: Nanos,
    pub qid: AtomicU64,
    pub errors: ErrorCounters,
}

impl Shared {
    pub fn next_qid(&self) -> u64 {
        self.qid.fetch_add(1, Ordering::Relaxed)
    }

    pub fn initial_position(&self, key: u64) -> Point {
        self.initial_positions[key as usize]
    }

    /// Fence polygon of an actor standing at `loc` (square fences centered at
    /// the location plus the sensing offset).
    pub fn fence_at(&self, loc: Point, offset: (f64, f64), side: f64) -> roam_core::ConvexPolygon {
        roam_core::ConvexPolygon::axis_aligned_square(loc.offset(offset.0, offset.1), side)
    }
}
