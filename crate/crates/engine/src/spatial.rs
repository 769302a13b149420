//! Per-cell spatial actors: the indexing actor keeps a versioned R-tree over
//! the locations of the actors in its cell; the monitoring actor is the sole
//! publisher of the cell's broadcast channel and relays movement updates to
//! sensing subscribers.

use std::collections::HashMap;
use std::sync::Arc;

use async_trait::async_trait;
use roam_core::grid::CellId;
use roam_core::{Envelope, Point, RTree};

use crate::kernel::{Actor, ActorContext, ActorId, Replier};
use crate::protocol::{Msg, OpError, Proto, Reply, Shared};

/// Location index for one cell. Under Fresh semantics the version stays 0 and
/// updates apply one by one; under Snapshot semantics whole batches apply
/// atomically and bump the version.
pub struct VersionedIndex {
    tree: RTree<ActorId>,
    entries: HashMap<ActorId, Point>,
    version: u64,
}

impl VersionedIndex {
    pub fn new() -> Self {
        VersionedIndex { tree: RTree::new(), entries: HashMap::new(), version: 0 }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert/replace or remove (`new == None`) a single entry.
    pub fn update(&mut self, actor: ActorId, new: Option<Point>) {
        if let Some(prev) = self.entries.remove(&actor) {
            self.tree.remove(prev, &actor);
        }
        if let Some(p) = new {
            self.tree.insert(p, actor);
            self.entries.insert(actor, p);
        }
    }

    /// Applies a batch atomically with respect to lookups (the owning actor's
    /// mailbox already serializes us; this just validates the version step).
    pub fn apply_batch(
        &mut self,
        updates: &[(ActorId, Option<Point>)],
        version: u64,
    ) -> Result<(), OpError> {
        if version != self.version + 1 {
            return Err(OpError::VersionGap { expected: self.version + 1, got: version });
        }
        for (actor, new) in updates {
            self.update(*actor, *new);
        }
        self.version = version;
        Ok(())
    }

    pub fn lookup(&self, window: &Envelope) -> Vec<(ActorId, Point)> {
        self.tree.query(window).into_iter().map(|(p, a)| (a, p)).collect()
    }

    pub fn all(&self) -> Vec<(ActorId, Point)> {
        self.entries.iter().map(|(a, p)| (*a, *p)).collect()
    }
}

impl Default for VersionedIndex {
    fn default() -> Self {
        Self::new()
    }
}

pub struct IndexActor {
    shared: Arc<Shared>,
    index: VersionedIndex,
}

impl IndexActor {
    pub fn new(shared: Arc<Shared>) -> Self {
        IndexActor { shared, index: VersionedIndex::new() }
    }
}

#[async_trait]
impl Actor<Proto> for IndexActor {
    async fn handle(&mut self, ctx: &ActorContext<Proto>, msg: Msg, reply: Replier<Proto>) {
        match msg {
            Msg::IndexSeed { entries } => {
                for (actor, p) in entries {
                    self.index.update(actor, Some(p));
                }
                reply.send(Reply::Ack);
            }
            Msg::IndexUpdate { actor, old, new } => {
                debug_assert_eq!(self.index.entries.get(&actor).copied(), old);
                let _ = old;
                self.index.update(actor, new);
                reply.send(Reply::AckAt { time: ctx.now_local() });
            }
            Msg::IndexLookup { window } => {
                reply.send(Reply::Lookup {
                    entries: self.index.lookup(&window),
                    version: self.index.version(),
                });
            }
            Msg::IndexApply { updates, version } => match self.index.apply_batch(&updates, version) {
                Ok(()) => reply.send(Reply::AckAt { time: ctx.now_local() }),
                Err(e) => {
                    self.shared.errors.bump(e);
                    reply.send(Reply::Err(e));
                }
            },
            _ => reply.send(Reply::Err(OpError::OutOfBounds)),
        }
    }
}

/// Relay endpoint for one cell: receives updates from movers (Fresh) or from
/// the cell's snapshot update actor (Snapshot) and publishes them on the
/// cell's stream channel.
pub struct MonitorActor {
    cell: CellId,
}

impl MonitorActor {
    pub fn new(id: ActorId) -> Self {
        MonitorActor { cell: id.cell() }
    }
}

#[async_trait]
impl Actor<Proto> for MonitorActor {
    async fn handle(&mut self, ctx: &ActorContext<Proto>, msg: Msg, reply: Replier<Proto>) {
        match msg {
            Msg::Relay { update } => {
                ctx.publish(self.cell, Msg::Stream { updates: vec![update] });
                reply.send(Reply::Ack);
            }
            Msg::Distribute { epoch: _, updates } => {
                if !updates.is_empty() {
                    ctx.publish(self.cell, Msg::Stream { updates });
                }
                reply.send(Reply::Ack);
            }
            _ => reply.send(Reply::Err(OpError::OutOfBounds)),
        }
    }
}
