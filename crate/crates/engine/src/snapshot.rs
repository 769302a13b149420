//! Snapshot-semantics machinery: per-cell snapshot update actors collect the
//! buffered itineraries of their residents, exchange cross-cell arrivals
//! under the coordination of a singleton controller, and apply each round as
//! a new index version. All cells end every round at the same version; cells
//! without residents are excluded from the round barrier and receive a
//! version sync from the controller instead.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use async_trait::async_trait;
use roam_core::grid::CellId;
use roam_core::{Itinerary, Point};

use crate::kernel::{Actor, ActorContext, ActorId, Replier};
use crate::protocol::{Msg, MoveUpdate, OpError, Proto, Reply, Shared};
use crate::trace::{TraceEvent, TracePayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Waiting for every resident's buffered itinerary.
    Collecting,
    /// Barrier met; waiting for the controller's reply and peer arrivals.
    Exchanging,
    /// No residents: parked until arrivals, a version sync, or a join.
    Dormant,
}

/// Snapshot update actor for one cell.
pub struct SuaActor {
    cell: CellId,
    shared: Arc<Shared>,
    phase: Phase,
    round: u64,
    residents: HashSet<ActorId>,
    received: HashMap<ActorId, Itinerary>,
    /// Early flushes for the next round (at most one per actor).
    pending_flush: HashMap<ActorId, Itinerary>,
    /// First-time flushers become residents at the next round.
    pending_joins: HashSet<ActorId>,
    registered_join: bool,
    /// Outbound final locations per destination cell, computed at the barrier.
    outbound: HashMap<CellId, Vec<(ActorId, Point)>>,
    /// Local index mutations for this round (stays and removals).
    local_updates: Vec<(ActorId, Option<Point>)>,
    stayers: HashSet<ActorId>,
    expected_from: Option<Vec<CellId>>,
    inbound: HashMap<CellId, Vec<(ActorId, Point)>>,
    seeded: bool,
}

impl SuaActor {
    pub fn new(id: ActorId, shared: Arc<Shared>) -> Self {
        SuaActor {
            cell: id.cell(),
            shared,
            phase: Phase::Dormant,
            round: 1,
            residents: HashSet::new(),
            received: HashMap::new(),
            pending_flush: HashMap::new(),
            pending_joins: HashSet::new(),
            registered_join: false,
            outbound: HashMap::new(),
            local_updates: Vec::new(),
            stayers: HashSet::new(),
            expected_from: None,
            inbound: HashMap::new(),
            seeded: false,
        }
    }

    fn on_flush(&mut self, ctx: &ActorContext<Proto>, actor: ActorId, itinerary: Itinerary) {
        let first_cell = self.shared.grid.cell_of(itinerary.first());
        match first_cell {
            Ok(c) if c != self.cell => {
                // Mis-addressed flush: forward to the right cell.
                ctx.tell(ActorId::snapshot_update(c), Msg::Flush { actor, itinerary });
                return;
            }
            Err(_) => return,
            _ => {}
        }
        if !self.residents.contains(&actor) {
            // A new actor joins as a resident at the next round; its standing
            // location arrives with its next flush.
            self.pending_joins.insert(actor);
            if self.phase == Phase::Dormant && !self.registered_join {
                self.registered_join = true;
                ctx.tell(ActorId::controller(), Msg::Register { cell: self.cell });
            }
            return;
        }
        if self.phase == Phase::Collecting && !self.received.contains_key(&actor) {
            self.received.insert(actor, itinerary);
            self.check_barrier(ctx);
        } else if let std::collections::hash_map::Entry::Vacant(e) = self.pending_flush.entry(actor) {
            e.insert(itinerary);
        } else {
            self.shared.errors.bump(OpError::DuplicateFlush);
        }
    }

    fn check_barrier(&mut self, ctx: &ActorContext<Proto>) {
        if self.phase != Phase::Collecting || self.received.len() < self.residents.len() {
            return;
        }
        // All residents reported. Work out who ends up where.
        self.outbound.clear();
        self.local_updates.clear();
        self.stayers.clear();
        for (actor, iti) in &self.received {
            let last = iti.last();
            let dest = self.shared.grid.cell_of(last).expect("positions stay in space");
            if dest == self.cell {
                self.stayers.insert(*actor);
                self.local_updates.push((*actor, Some(last)));
            } else {
                self.outbound.entry(dest).or_default().push((*actor, last));
                self.local_updates.push((*actor, None));
            }
        }
        let dests: Vec<CellId> = self.outbound.keys().copied().collect();
        ctx.tell(ActorId::controller(), Msg::Announce { cell: self.cell, epoch: self.round, dests });
        self.phase = Phase::Exchanging;
    }

    /// Ships the buffered itineraries to the monitors of every cell they
    /// span. Runs after the controller's reply, by which point every sensing
    /// actor has flushed this epoch and finalized its accumulated fence and
    /// subscriptions.
    fn distribute_for_reactions(&mut self, ctx: &ActorContext<Proto>) {
        let mut per_cell: HashMap<CellId, Vec<MoveUpdate>> = HashMap::new();
        for (actor, iti) in &self.received {
            let spanned = self.shared.grid.cells_of_path(iti.points()).expect("itineraries stay in space");
            let update = MoveUpdate {
                mover: *actor,
                itinerary: iti.clone(),
                t_u: iti.last_stamp(),
                epoch: Some(self.round),
            };
            for c in spanned {
                per_cell.entry(c).or_default().push(update.clone());
            }
        }
        for (c, updates) in per_cell {
            ctx.tell(ActorId::monitor(c), Msg::Distribute { epoch: self.round, updates });
        }
    }

    async fn maybe_apply(&mut self, ctx: &ActorContext<Proto>) {
        let Some(expected) = &self.expected_from else {
            return;
        };
        if self.phase != Phase::Exchanging || !expected.iter().all(|c| self.inbound.contains_key(c)) {
            return;
        }
        let mut updates = std::mem::take(&mut self.local_updates);
        let mut new_residents = std::mem::take(&mut self.stayers);
        for (_, arrivals) in self.inbound.drain() {
            for (actor, p) in arrivals {
                new_residents.insert(actor);
                updates.push((actor, Some(p)));
            }
        }
        let version = self.round;
        let ack = ctx.send(ActorId::index(self.cell), Msg::IndexApply { updates, version }).recv().await;
        if !matches!(ack, Ok(Reply::AckAt { .. })) {
            // VersionGap or a dropped reply; already counted at the index.
            return;
        }
        self.residents = new_residents;
        ctx.trace(TraceEvent::new(
            ctx.now_local(),
            ctx.id(),
            TracePayload::SnapshotApplied { epoch: self.round, version, residents: self.residents.len() as u32 },
        ));
        ctx.tell(
            ActorId::controller(),
            Msg::Applied { cell: self.cell, epoch: self.round, residents: self.residents.len() as u32 },
        );
        self.start_next_round(ctx);
    }

    fn start_next_round(&mut self, ctx: &ActorContext<Proto>) {
        self.round += 1;
        self.received.clear();
        self.expected_from = None;
        self.inbound.clear();
        self.outbound.clear();
        if !self.pending_joins.is_empty() {
            // Joins registered while active become residents right away; the
            // controller keeps counting us active as long as we applied with
            // residents > 0 or they flush this round.
            self.residents.extend(self.pending_joins.drain());
        }
        if self.residents.is_empty() {
            self.phase = Phase::Dormant;
            return;
        }
        self.phase = Phase::Collecting;
        let early: Vec<(ActorId, Itinerary)> = self.pending_flush.drain().collect();
        for (actor, iti) in early {
            self.on_flush(ctx, actor, iti);
        }
        self.check_barrier(ctx);
    }

    fn on_seed(&mut self, residents: Vec<ActorId>) {
        self.seeded = true;
        self.residents = residents.into_iter().collect();
        self.round = 1;
        self.phase = if self.residents.is_empty() { Phase::Dormant } else { Phase::Collecting };
    }

    async fn on_version_sync(&mut self, ctx: &ActorContext<Proto>, epoch: u64) {
        // An empty cell keeps its index version in lockstep without joining
        // the barrier.
        let ack = ctx
            .send(ActorId::index(self.cell), Msg::IndexApply { updates: Vec::new(), version: epoch })
            .recv()
            .await;
        if matches!(ack, Ok(Reply::AckAt { .. })) {
            ctx.trace(TraceEvent::new(
                ctx.now_local(),
                ctx.id(),
                TracePayload::SnapshotApplied { epoch, version: epoch, residents: 0 },
            ));
        }
        self.round = epoch + 1;
    }

    fn on_join_round(&mut self, ctx: &ActorContext<Proto>, epoch: u64) {
        self.registered_join = false;
        self.round = epoch;
        self.residents.extend(self.pending_joins.drain());
        self.phase = Phase::Collecting;
        let early: Vec<(ActorId, Itinerary)> = self.pending_flush.drain().collect();
        for (actor, iti) in early {
            self.on_flush(ctx, actor, iti);
        }
        self.check_barrier(ctx);
    }

    fn on_round_reply(&mut self, ctx: &ActorContext<Proto>, epoch: u64, expected: Vec<CellId>) {
        if self.phase == Phase::Dormant {
            // Activated by inbound crossings: we take part in the exchange
            // with no outbound or local updates of our own.
            self.round = epoch;
            self.phase = Phase::Exchanging;
        }
        debug_assert_eq!(epoch, self.round);
        self.distribute_for_reactions(ctx);
        for (dest, actors) in std::mem::take(&mut self.outbound) {
            ctx.tell(
                ActorId::snapshot_update(dest),
                Msg::Arrivals { from: self.cell, epoch: self.round, actors },
            );
        }
        self.expected_from = Some(expected);
    }
}

#[async_trait]
impl Actor<Proto> for SuaActor {
    async fn handle(&mut self, ctx: &ActorContext<Proto>, msg: Msg, reply: Replier<Proto>) {
        match msg {
            Msg::SuaSeed { residents } => {
                self.on_seed(residents);
                reply.send(Reply::Ack);
            }
            Msg::Flush { actor, itinerary } => {
                self.on_flush(ctx, actor, itinerary);
                reply.send(Reply::Ack);
            }
            Msg::RoundReply { epoch, expected } => {
                self.on_round_reply(ctx, epoch, expected);
                self.maybe_apply(ctx).await;
                reply.send(Reply::Ack);
            }
            Msg::Arrivals { from, epoch, actors } => {
                debug_assert!(epoch == self.round || self.phase == Phase::Dormant);
                if self.phase == Phase::Dormant {
                    // The controller's reply for this round is still in flight.
                    self.round = epoch;
                    self.phase = Phase::Exchanging;
                }
                self.inbound.insert(from, actors);
                self.maybe_apply(ctx).await;
                reply.send(Reply::Ack);
            }
            Msg::VersionSync { epoch } => {
                self.on_version_sync(ctx, epoch).await;
                reply.send(Reply::Ack);
            }
            Msg::JoinRound { epoch } => {
                self.on_join_round(ctx, epoch);
                reply.send(Reply::Ack);
            }
            _ => reply.send(Reply::Err(OpError::OutOfBounds)),
        }
    }
}

/// Singleton coordinator: collects one announcement per active cell each
/// round, tells every participant whom to expect arrivals from, and closes
/// the round once every participant applied, version-syncing the idle cells.
pub struct ControllerActor {
    shared: Arc<Shared>,
    round: u64,
    active: HashSet<CellId>,
    announced: HashMap<CellId, Vec<CellId>>,
    /// Announcements for round + 1 arriving while this round still applies.
    announced_next: HashMap<CellId, Vec<CellId>>,
    participants: HashSet<CellId>,
    applied: HashSet<CellId>,
    next_active: HashSet<CellId>,
    registrations: HashSet<CellId>,
    collecting: bool,
}

impl ControllerActor {
    pub fn new(shared: Arc<Shared>) -> Self {
        ControllerActor {
            shared,
            round: 1,
            active: HashSet::new(),
            announced: HashMap::new(),
            announced_next: HashMap::new(),
            participants: HashSet::new(),
            applied: HashSet::new(),
            next_active: HashSet::new(),
            registrations: HashSet::new(),
            collecting: true,
        }
    }

    fn check_announce_barrier(&mut self, ctx: &ActorContext<Proto>) {
        if !self.collecting || !self.active.iter().all(|c| self.announced.contains_key(c)) {
            return;
        }
        let (participants, mut expected) = invert_announcements(&self.announced);
        for p in &participants {
            let exp = expected.remove(p).unwrap_or_default();
            ctx.tell(ActorId::snapshot_update(*p), Msg::RoundReply { epoch: self.round, expected: exp });
        }
        self.participants = participants;
        self.applied.clear();
        self.next_active.clear();
        self.collecting = false;
    }

    fn check_apply_barrier(&mut self, ctx: &ActorContext<Proto>) {
        if self.collecting || !self.participants.iter().all(|c| self.applied.contains(c)) {
            return;
        }
        // Round complete: this instant is the snapshot's completion time.
        // Idle cells catch up to the new version without having joined the
        // barrier; joiners start at the next round.
        // Registered joiners still need this round's version before they
        // start collecting the next one (controller-to-cell FIFO keeps the
        // sync ahead of the JoinRound message).
        for id in 0..self.shared.grid.cell_count() {
            let c = CellId(id);
            if !self.participants.contains(&c) {
                ctx.tell(ActorId::snapshot_update(c), Msg::VersionSync { epoch: self.round });
            }
        }
        let mut active = std::mem::take(&mut self.next_active);
        for c in self.registrations.drain() {
            if !self.participants.contains(&c) {
                ctx.tell(ActorId::snapshot_update(c), Msg::JoinRound { epoch: self.round + 1 });
            }
            active.insert(c);
        }
        self.active = active;
        self.round += 1;
        self.announced = std::mem::take(&mut self.announced_next);
        self.participants.clear();
        self.applied.clear();
        self.collecting = true;
        self.check_announce_barrier(ctx);
    }
}

#[async_trait]
impl Actor<Proto> for ControllerActor {
    async fn handle(&mut self, ctx: &ActorContext<Proto>, msg: Msg, reply: Replier<Proto>) {
        match msg {
            Msg::CtrlSeed { active } => {
                self.active = active.into_iter().collect();
                self.round = 1;
                self.collecting = true;
                reply.send(Reply::Ack);
            }
            Msg::Announce { cell, epoch, dests } => {
                if epoch == self.round && self.collecting {
                    self.announced.insert(cell, dests);
                    self.check_announce_barrier(ctx);
                    reply.send(Reply::Ack);
                } else if epoch == self.round + 1 {
                    // A fast cell already finished this round and announced
                    // the next one; hold it until the round opens.
                    self.announced_next.insert(cell, dests);
                    reply.send(Reply::Ack);
                } else {
                    self.shared.errors.bump(OpError::StaleRound);
                    reply.send(Reply::Err(OpError::StaleRound));
                }
            }
            Msg::Applied { cell, epoch, residents } => {
                if epoch == self.round && !self.collecting {
                    self.applied.insert(cell);
                    if residents > 0 {
                        self.next_active.insert(cell);
                    }
                    self.check_apply_barrier(ctx);
                }
                reply.send(Reply::Ack);
            }
            Msg::Register { cell } => {
                self.registrations.insert(cell);
                reply.send(Reply::Ack);
            }
            _ => reply.send(Reply::Err(OpError::OutOfBounds)),
        }
    }
}

/// Inverts the announcement relation of one round: the reply to cell `c`
/// lists the cells that named `c` as a destination, and the participant set
/// is every announcer plus every named destination.
pub fn invert_announcements(
    announced: &HashMap<CellId, Vec<CellId>>,
) -> (HashSet<CellId>, HashMap<CellId, Vec<CellId>>) {
    let mut expected: HashMap<CellId, Vec<CellId>> = HashMap::new();
    let mut participants: HashSet<CellId> = announced.keys().copied().collect();
    for (from, dests) in announced {
        for d in dests {
            expected.entry(*d).or_default().push(*from);
            participants.insert(*d);
        }
    }
    (participants, expected)
}
