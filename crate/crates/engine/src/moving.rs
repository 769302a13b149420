//! The user-facing moving actor: location updates, spatial range queries,
//! reactive sensing, and the reaction check on incoming stream updates.
//!
//! Under Fresh semantics a move updates the per-cell indexes before the ack
//! resolves (its completion time is the index apply time), then relays the
//! hop to the monitors of the cells it spans. Under Snapshot semantics moves
//! buffer locally and nothing leaves the actor until its flush timer fires.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::atomic::Ordering;
use std::sync::Arc;

use async_trait::async_trait;
use roam_core::grid::CellId;
use roam_core::{convex_hull, eval_predicate_path, ConvexPolygon, Envelope, Itinerary, Nanos, Point, Predicate, Segment};

use crate::kernel::{Actor, ActorContext, ActorId, Replier};
use crate::protocol::{
    Msg, MoveUpdate, OpError, Proto, ReactionCallback, ReactionEvent, Reply, Semantics, Shared,
};
use crate::trace::{TraceEvent, TracePayload};

const FRESH_DEDUP_WINDOW: usize = 64;
const RETAINED_EPOCHS: usize = 2;

struct Sensing {
    predicate: Predicate,
    offset: (f64, f64),
    callback: Option<ReactionCallback>,
    /// Fresh-mode duplicate suppression: recently seen update times per mover
    /// (an itinerary spanning k cells is relayed k times).
    seen: HashMap<u64, VecDeque<Nanos>>,
    /// Corners of the fences held at every buffered location this epoch.
    acc_corners: Vec<Point>,
    /// Finalized accumulated fences of recent epochs, newest last.
    retained: VecDeque<(u64, ConvexPolygon)>,
    /// (mover, epoch) pairs already evaluated this retention window.
    evaluated: HashSet<(u64, u64)>,
    /// Snapshot updates that arrived before our own flush finalized their
    /// epoch's accumulated fence.
    pending: Vec<MoveUpdate>,
}

pub struct MovingActor {
    shared: Arc<Shared>,
    loc: Point,
    cell: CellId,
    last_t_u: Nanos,
    sensing: Option<Sensing>,
    subs: BTreeSet<CellId>,
    buffer: Itinerary,
    flushed_epochs: u64,
}

impl MovingActor {
    pub fn new(id: ActorId, shared: Arc<Shared>) -> Self {
        let loc = shared.initial_position(id.key);
        let cell = shared.grid.cell_of(loc).expect("initial positions lie inside the space");
        let init_time = shared.init_time;
        MovingActor {
            shared,
            loc,
            cell,
            last_t_u: init_time,
            sensing: None,
            subs: BTreeSet::new(),
            buffer: Itinerary::single(loc, init_time),
            flushed_epochs: 0,
        }
    }

    fn fence_at(&self, loc: Point) -> ConvexPolygon {
        let offset = self.sensing.as_ref().map(|s| s.offset).unwrap_or((0.0, 0.0));
        self.shared.fence_at(loc, offset, self.shared.fence_side)
    }

    fn fence_cells(&self, fence: &ConvexPolygon) -> Vec<CellId> {
        self.shared
            .grid
            .cells_of_envelope(&fence.bounding_box())
            .expect("fence centered inside the space")
    }

    fn sync_subs(&mut self, ctx: &ActorContext<Proto>, target: BTreeSet<CellId>) {
        for c in target.difference(&self.subs) {
            ctx.subscribe(*c, ctx.id());
        }
        for c in self.subs.difference(&target) {
            ctx.unsubscribe(*c, ctx.id());
        }
        self.subs = target;
    }

    async fn do_move(&mut self, ctx: &ActorContext<Proto>, dest: Point, reply: Replier<Proto>) {
        if !dest.is_finite() || !self.shared.grid.space().contains(dest) {
            self.shared.errors.bump(OpError::OutOfBounds);
            reply.send(Reply::Err(OpError::OutOfBounds));
            return;
        }
        match self.shared.semantics {
            Semantics::Fresh => self.move_fresh(ctx, dest, reply).await,
            Semantics::Snapshot => self.move_snapshot(ctx, dest, reply),
        }
    }

    async fn move_fresh(&mut self, ctx: &ActorContext<Proto>, dest: Point, reply: Replier<Proto>) {
        let from = self.loc;
        let from_cell = self.cell;
        let to_cell = self.shared.grid.cell_of(dest).expect("checked in bounds");
        let me = ctx.id();

        // The move completes when the index reflects it: a removal at the old
        // cell first, then the insertion whose apply time becomes t_u.
        let apply_time = if from_cell == to_cell {
            let ack = ctx
                .send(ActorId::index(from_cell), Msg::IndexUpdate { actor: me, old: Some(from), new: Some(dest) })
                .recv()
                .await;
            match ack {
                Ok(Reply::AckAt { time }) => time,
                _ => {
                    reply.send(Reply::Err(OpError::OutOfBounds));
                    return;
                }
            }
        } else {
            let removed = ctx
                .send(ActorId::index(from_cell), Msg::IndexUpdate { actor: me, old: Some(from), new: None })
                .recv()
                .await;
            if !matches!(removed, Ok(Reply::AckAt { .. })) {
                reply.send(Reply::Err(OpError::OutOfBounds));
                return;
            }
            let inserted = ctx
                .send(ActorId::index(to_cell), Msg::IndexUpdate { actor: me, old: None, new: Some(dest) })
                .recv()
                .await;
            match inserted {
                Ok(Reply::AckAt { time }) => time,
                _ => {
                    reply.send(Reply::Err(OpError::OutOfBounds));
                    return;
                }
            }
        };
        let t_u = apply_time.max(self.last_t_u + 1);
        let hop = Itinerary::new(vec![from, dest], vec![self.last_t_u, t_u]).expect("stamps increase");
        self.loc = dest;
        self.cell = to_cell;
        self.last_t_u = t_u;

        let spanned = self
            .shared
            .grid
            .cells_of_segment(&Segment::new(from, dest))
            .expect("endpoints inside the space");
        for c in spanned {
            ctx.tell(
                ActorId::monitor(c),
                Msg::Relay { update: MoveUpdate { mover: me, itinerary: hop.clone(), t_u, epoch: None } },
            );
        }

        if self.sensing.is_some() {
            let fence = self.fence_at(dest);
            let target: BTreeSet<CellId> = self.fence_cells(&fence).into_iter().collect();
            self.sync_subs(ctx, target);
        }
        ctx.trace(TraceEvent::new(t_u, me, TracePayload::MoveDone { from, to: dest }));
        reply.send(Reply::AckAt { time: t_u });
    }

    fn move_snapshot(&mut self, ctx: &ActorContext<Proto>, dest: Point, reply: Replier<Proto>) {
        let from = self.loc;
        let to_cell = self.shared.grid.cell_of(dest).expect("checked in bounds");
        let t_u = ctx.now_local().max(self.last_t_u + 1);
        assert!(self.buffer.push(dest, t_u));
        self.loc = dest;
        self.cell = to_cell;
        self.last_t_u = t_u;
        if self.sensing.is_some() {
            let fence = self.fence_at(dest);
            let grown: Vec<CellId> = self.fence_cells(&fence);
            if let Some(s) = self.sensing.as_mut() {
                s.acc_corners.extend_from_slice(fence.vertices());
            }
            // Subscriptions grow with the accumulated fence and shrink only at
            // the next flush, so epoch distributions cannot outrun us.
            for c in grown {
                if self.subs.insert(c) {
                    ctx.subscribe(c, ctx.id());
                }
            }
        }
        ctx.trace(TraceEvent::new(t_u, ctx.id(), TracePayload::MoveDone { from, to: dest }));
        reply.send(Reply::AckAt { time: t_u });
    }

    async fn find_actors(&mut self, ctx: &ActorContext<Proto>, range: Envelope, reply: Replier<Proto>) {
        let space = self.shared.grid.space();
        let Some(range) = range.intersection(&space) else {
            self.shared.errors.bump(OpError::OutOfBounds);
            reply.send(Reply::Err(OpError::OutOfBounds));
            return;
        };
        let qid = self.shared.next_qid();
        let t_s = ctx.now_local();
        ctx.trace(TraceEvent::new(t_s, ctx.id(), TracePayload::QueryStart { qid, range }));
        let cells = self.shared.grid.cells_of_envelope(&range).expect("range intersects space");
        let mut retries: u32 = 0;
        loop {
            let pending: Vec<_> = cells
                .iter()
                .map(|&c| {
                    let window = range
                        .intersection(&self.shared.grid.cell_extent(c))
                        .expect("cell overlaps range");
                    (c, ctx.send(ActorId::index(c), Msg::IndexLookup { window }))
                })
                .collect();
            let mut versions: Vec<(CellId, u64)> = Vec::with_capacity(pending.len());
            let mut entries: Vec<(ActorId, Point)> = Vec::new();
            let mut failed = false;
            for (c, p) in pending {
                match p.recv().await {
                    Ok(Reply::Lookup { entries: e, version }) => {
                        versions.push((c, version));
                        entries.extend(e);
                    }
                    _ => failed = true,
                }
            }
            let consistent = !failed && versions.windows(2).all(|w| w[0].1 == w[1].1);
            if consistent {
                // A cross-cell move caught mid-transition can appear twice;
                // keep one entry per actor.
                let mut seen: HashSet<u64> = HashSet::new();
                entries.retain(|(a, _)| seen.insert(a.key));
                let t_e = ctx.now_local();
                ctx.trace(TraceEvent::new(
                    t_e,
                    ctx.id(),
                    TracePayload::QueryEnd {
                        qid,
                        retries,
                        versions: versions.clone(),
                        result: entries.iter().map(|(a, p)| (a.key, *p)).collect(),
                    },
                ));
                reply.send(Reply::Found { entries, versions, retries });
                return;
            }
            retries += 1;
            if retries > self.shared.query_retry_limit {
                reply.send(Reply::Err(OpError::SnapshotUnstable));
                return;
            }
            tokio::time::sleep(self.shared.snapshot_interval / 10).await;
        }
    }

    fn start_sensing(
        &mut self,
        ctx: &ActorContext<Proto>,
        predicate: Predicate,
        offset: (f64, f64),
        callback: Option<ReactionCallback>,
        reply: Replier<Proto>,
    ) {
        // Re-invocation replaces the previous spec entirely.
        self.sensing = Some(Sensing {
            predicate,
            offset,
            callback,
            seen: HashMap::new(),
            acc_corners: Vec::new(),
            retained: VecDeque::new(),
            evaluated: HashSet::new(),
            pending: Vec::new(),
        });
        let fence = self.fence_at(self.loc);
        if self.shared.semantics == Semantics::Snapshot {
            if let Some(s) = self.sensing.as_mut() {
                s.acc_corners = fence.vertices().to_vec();
            }
        }
        let target: BTreeSet<CellId> = self.fence_cells(&fence).into_iter().collect();
        self.sync_subs(ctx, target);
        ctx.trace(TraceEvent::new(
            ctx.now_local(),
            ctx.id(),
            TracePayload::SensingOn { predicate, fence_side: self.shared.fence_side, offset },
        ));
        reply.send(Reply::Ack);
    }

    fn end_sensing(&mut self, ctx: &ActorContext<Proto>, reply: Replier<Proto>) {
        if self.sensing.is_some() {
            self.sync_subs(ctx, BTreeSet::new());
            self.sensing = None;
            ctx.trace(TraceEvent::new(ctx.now_local(), ctx.id(), TracePayload::SensingOff));
        }
        reply.send(Reply::Ack);
    }

    /// Snapshot flush: ship the buffered itinerary to the snapshot update
    /// actor of the cell holding its first location, then reset the buffer to
    /// the standing location.
    fn flush(&mut self, ctx: &ActorContext<Proto>) {
        let epoch = self.flushed_epochs + 1;
        let t_i = ctx.now_local().max(self.last_t_u + 1);
        self.last_t_u = t_i;
        ctx.trace(TraceEvent::new(
            t_i,
            ctx.id(),
            TracePayload::FlushSent { epoch, points: self.buffer.len() as u32 },
        ));

        // Finalize this epoch's accumulated fence and trim subscriptions to
        // the retained fences plus the current one, before the flush can
        // trigger the round barrier anywhere.
        if self.sensing.is_some() {
            let current_fence = self.fence_at(self.loc);
            let mut target: BTreeSet<CellId> = self.fence_cells(&current_fence).into_iter().collect();
            {
                let s = self.sensing.as_mut().expect("sensing present");
                let acc = convex_hull(&s.acc_corners).expect("square fence corners are never collinear");
                s.retained.push_back((epoch, acc));
                while s.retained.len() > RETAINED_EPOCHS {
                    if let Some((old_epoch, _)) = s.retained.pop_front() {
                        s.evaluated.retain(|(_, e)| *e != old_epoch);
                    }
                }
                s.acc_corners = current_fence.vertices().to_vec();
            }
            let retained: Vec<ConvexPolygon> = self
                .sensing
                .as_ref()
                .expect("sensing present")
                .retained
                .iter()
                .map(|(_, f)| f.clone())
                .collect();
            for f in &retained {
                target.extend(
                    self.shared
                        .grid
                        .cells_of_envelope(&f.bounding_box().intersection(&self.shared.grid.space()).expect("fence touches space"))
                        .expect("fence intersects space"),
                );
            }
            self.sync_subs(ctx, target);
        }

        let first_cell = self.shared.grid.cell_of(self.buffer.first()).expect("buffer starts in space");
        ctx.tell(
            ActorId::snapshot_update(first_cell),
            Msg::Flush { actor: ctx.id(), itinerary: self.buffer.clone() },
        );
        self.buffer = Itinerary::single(self.loc, t_i);
        self.flushed_epochs = epoch;

        // Updates that raced ahead of our flush can be evaluated now.
        let ready: Vec<MoveUpdate> = {
            let s = self.sensing.as_mut();
            match s {
                Some(s) => {
                    let (ready, later): (Vec<_>, Vec<_>) =
                        s.pending.drain(..).partition(|u| u.epoch.unwrap_or(0) <= epoch);
                    s.pending = later;
                    ready
                }
                None => Vec::new(),
            }
        };
        for u in ready {
            self.on_update(ctx, u);
        }
    }

    fn on_update(&mut self, ctx: &ActorContext<Proto>, u: MoveUpdate) {
        if u.mover == ctx.id() {
            return;
        }
        let flushed = self.flushed_epochs;
        let loc = self.loc;
        let shared = Arc::clone(&self.shared);
        let Some(s) = self.sensing.as_mut() else {
            return;
        };
        // The reaction's cause time: under Fresh, the hop's completion;
        // under Snapshot, the completion of the earliest buffered move whose
        // addition satisfies the predicate (latency spans the wait for the
        // flush round).
        let cause = match u.epoch {
            None => {
                let seen = s.seen.entry(u.mover.key).or_default();
                if seen.contains(&u.t_u) {
                    return;
                }
                seen.push_back(u.t_u);
                while seen.len() > FRESH_DEDUP_WINDOW {
                    seen.pop_front();
                }
                let fence = shared.fence_at(loc, s.offset, shared.fence_side);
                if eval_predicate_path(s.predicate, u.itinerary.points(), &fence) {
                    Some(u.t_u)
                } else {
                    None
                }
            }
            Some(epoch) => {
                if epoch > flushed {
                    s.pending.push(u);
                    return;
                }
                if !s.evaluated.insert((u.mover.key, epoch)) {
                    return;
                }
                let Some((_, acc)) = s.retained.iter().find(|(e, _)| *e == epoch) else {
                    shared.errors.stale_reaction_drop.fetch_add(1, Ordering::Relaxed);
                    return;
                };
                if eval_predicate_path(s.predicate, u.itinerary.points(), acc) {
                    let points = u.itinerary.points();
                    let k = (1..=points.len())
                        .find(|&k| eval_predicate_path(s.predicate, &points[..k], acc))
                        .expect("full path satisfies");
                    Some(u.itinerary.stamps()[k - 1])
                } else {
                    None
                }
            }
        };
        if let Some(mover_t_u) = cause {
            let trigger_time = ctx.now_local().max(mover_t_u);
            let event = ReactionEvent {
                sensor: ctx.id(),
                mover: u.mover,
                mover_t_u,
                trigger_time,
                epoch: u.epoch,
            };
            ctx.trace(TraceEvent::new(
                trigger_time,
                ctx.id(),
                TracePayload::ReactionFired { mover: u.mover.key, mover_t_u, epoch: u.epoch },
            ));
            if let Some(cb) = &s.callback {
                (cb.0)(&event);
            }
        }
    }
}

#[async_trait]
impl Actor<Proto> for MovingActor {
    async fn handle(&mut self, ctx: &ActorContext<Proto>, msg: Msg, reply: Replier<Proto>) {
        match msg {
            Msg::Move { dest } => self.do_move(ctx, dest, reply).await,
            Msg::FindActors { range } => self.find_actors(ctx, range, reply).await,
            Msg::StartSensing { predicate, fence_offset, callback } => {
                self.start_sensing(ctx, predicate, fence_offset, callback, reply);
            }
            Msg::EndSensing => self.end_sensing(ctx, reply),
            Msg::Timer(_) => {
                if self.shared.semantics == Semantics::Snapshot {
                    self.flush(ctx);
                }
                reply.send(Reply::Ack);
            }
            Msg::Stream { updates } => {
                for u in updates {
                    self.on_update(ctx, u);
                }
                reply.send(Reply::Ack);
            }
            _ => reply.send(Reply::Err(OpError::OutOfBounds)),
        }
    }
}
