//! A minimal virtual-actor kernel: identity-addressed actors with sequential
//! mailboxes, asynchronous request/reply, per-cell broadcast streams, timers,
//! and shard-aware dispatch.
//!
//! Actors are *virtual*: the first message addressed to an [`ActorId`]
//! activates it through a per-kind factory, and it lives until the kernel
//! stops. Each actor processes one message at a time; concurrent sends to the
//! same actor serialize through its mailbox, and a sender's messages to one
//! receiver arrive in send order. Multi-machine execution is simulated by
//! in-process shards: one worker pool per shard, with an optional delivery
//! latency on cross-shard messages standing in for the network.

mod clock;
mod timer;

pub use clock::Clock;
pub use timer::TimerId;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use dashmap::DashMap;
use roam_core::grid::CellId;
use roam_core::Nanos;
use tokio::sync::{mpsc, oneshot};

use crate::trace::TraceSink;

/// The five actor roles of the platform. The kernel itself only uses the kind
/// for factory lookup and message accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActorKind {
    Moving,
    Index,
    Monitor,
    SnapshotUpdate,
    SnapshotController,
}

impl ActorKind {
    pub const ALL: [ActorKind; 5] = [
        ActorKind::Moving,
        ActorKind::Index,
        ActorKind::Monitor,
        ActorKind::SnapshotUpdate,
        ActorKind::SnapshotController,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ActorKind::Moving => "Moving",
            ActorKind::Index => "Index",
            ActorKind::Monitor => "Monitor",
            ActorKind::SnapshotUpdate => "SnapshotUpdate",
            ActorKind::SnapshotController => "SnapshotController",
        }
    }

    pub fn parse(s: &str) -> Option<ActorKind> {
        ActorKind::ALL.into_iter().find(|k| k.name() == s)
    }

    fn index(&self) -> usize {
        match self {
            ActorKind::Moving => 0,
            ActorKind::Index => 1,
            ActorKind::Monitor => 2,
            ActorKind::SnapshotUpdate => 3,
            ActorKind::SnapshotController => 4,
        }
    }
}

/// Identity of an actor: a kind plus a key (actor number or cell id; the
/// snapshot controller is a singleton with key 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActorId {
    pub kind: ActorKind,
    pub key: u64,
}

impl ActorId {
    pub fn moving(key: u64) -> Self {
        ActorId { kind: ActorKind::Moving, key }
    }

    pub fn index(cell: CellId) -> Self {
        ActorId { kind: ActorKind::Index, key: cell.0 as u64 }
    }

    pub fn monitor(cell: CellId) -> Self {
        ActorId { kind: ActorKind::Monitor, key: cell.0 as u64 }
    }

    pub fn snapshot_update(cell: CellId) -> Self {
        ActorId { kind: ActorKind::SnapshotUpdate, key: cell.0 as u64 }
    }

    pub fn controller() -> Self {
        ActorId { kind: ActorKind::SnapshotController, key: 0 }
    }

    pub fn cell(&self) -> CellId {
        CellId(self.key as u32)
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.key)
    }
}

/// Message and reply types of a kernel instance. All actors in one kernel
/// share the protocol; tests instantiate the kernel with their own.
pub trait Protocol: Send + Sync + 'static {
    type Msg: Send + Clone + 'static;
    type Reply: Send + 'static;

    /// The message delivered when a registered timer fires.
    fn timer_msg(timer: TimerId) -> Self::Msg;
}

/// Behavior of one actor. `handle` runs exclusively: the kernel never overlaps
/// two invocations for the same actor.
#[async_trait]
pub trait Actor<P: Protocol>: Send {
    async fn handle(&mut self, ctx: &ActorContext<P>, msg: P::Msg, reply: Replier<P>);
}

/// One-shot reply slot handed to the actor with each request. Dropping it
/// unanswered resolves the caller with [`KernelError::ReplyDropped`].
pub struct Replier<P: Protocol> {
    slot: Option<oneshot::Sender<P::Reply>>,
}

impl<P: Protocol> Replier<P> {
    fn new(slot: Option<oneshot::Sender<P::Reply>>) -> Self {
        Replier { slot }
    }

    pub fn none() -> Self {
        Replier { slot: None }
    }

    /// True when a caller is waiting on this message.
    pub fn is_wanted(&self) -> bool {
        self.slot.is_some()
    }

    pub fn send(mut self, reply: P::Reply) {
        if let Some(slot) = self.slot.take() {
            let _ = slot.send(reply);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("kernel stopped")]
    KernelStopped,
    #[error("reply dropped by the target actor")]
    ReplyDropped,
    #[error("reply deadline elapsed")]
    Timeout,
}

/// Pending reply handle returned by [`Kernel::send`].
pub struct PendingReply<R> {
    state: PendingState<R>,
}

enum PendingState<R> {
    Failed(KernelError),
    Waiting(oneshot::Receiver<R>),
}

impl<R> PendingReply<R> {
    fn failed(err: KernelError) -> Self {
        PendingReply { state: PendingState::Failed(err) }
    }

    fn waiting(rx: oneshot::Receiver<R>) -> Self {
        PendingReply { state: PendingState::Waiting(rx) }
    }

    pub async fn recv(self) -> Result<R, KernelError> {
        match self.state {
            PendingState::Failed(e) => Err(e),
            PendingState::Waiting(rx) => rx.await.map_err(|_| KernelError::ReplyDropped),
        }
    }

    /// Reply with a deadline; used by fault-injection tests only, there is no
    /// default timeout in-process.
    pub async fn recv_timeout(self, deadline: Duration) -> Result<R, KernelError> {
        match self.state {
            PendingState::Failed(e) => Err(e),
            PendingState::Waiting(rx) => match tokio::time::timeout(deadline, rx).await {
                Err(_) => Err(KernelError::Timeout),
                Ok(r) => r.map_err(|_| KernelError::ReplyDropped),
            },
        }
    }
}

struct Envelope<P: Protocol> {
    msg: P::Msg,
    reply: Option<oneshot::Sender<P::Reply>>,
}

pub type Factory<P> = Box<dyn Fn(ActorId) -> Box<dyn Actor<P>> + Send + Sync>;
pub type Router = Box<dyn Fn(ActorId) -> u32 + Send + Sync>;

/// Static configuration of a kernel instance.
pub struct KernelConfig {
    pub shards: u32,
    pub threads_per_shard: usize,
    /// Extra delivery delay applied to messages that cross shards; zero means
    /// in-process delivery everywhere.
    pub cross_shard_latency: Duration,
    /// Per-shard clock skew is drawn uniformly from +-max_clock_skew.
    pub max_clock_skew: Duration,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            shards: 1,
            threads_per_shard: 2,
            cross_shard_latency: Duration::ZERO,
            max_clock_skew: Duration::ZERO,
            seed: 0,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct KernelStats {
    pub sent: u64,
    pub processed: u64,
    /// Messages enqueued per target actor kind.
    pub enqueued_by_kind: [u64; 5],
}

std::thread_local! {
    static CURRENT_SHARD: std::cell::Cell<Option<u32>> = const { std::cell::Cell::new(None) };
}

/// Shard tag of the current thread: set on shard worker threads, `None` on
/// client/control threads.
pub fn current_shard() -> Option<u32> {
    CURRENT_SHARD.with(|s| s.get())
}

struct Inner<P: Protocol> {
    cfg: KernelConfig,
    handles: Vec<tokio::runtime::Handle>,
    runtimes: parking_lot_free::Mutex<Vec<tokio::runtime::Runtime>>,
    router: Router,
    factories: HashMap<ActorKind, Factory<P>>,
    actors: DashMap<ActorId, mpsc::UnboundedSender<Envelope<P>>>,
    channels: DashMap<CellId, Vec<ActorId>>,
    links: DashMap<(u32, u32), mpsc::UnboundedSender<LinkItem<P>>>,
    clock: Clock,
    trace: TraceSink,
    timers: timer::TimerTable,
    sent: AtomicU64,
    processed: AtomicU64,
    enqueued_by_kind: [AtomicU64; 5],
    stopped: AtomicBool,
}

// Tiny shim so Inner stays free of poisoning noise.
mod parking_lot_free {
    pub struct Mutex<T>(std::sync::Mutex<T>);

    impl<T> Mutex<T> {
        pub fn new(v: T) -> Self {
            Mutex(std::sync::Mutex::new(v))
        }

        pub fn lock(&self) -> std::sync::MutexGuard<'_, T> {
            self.0.lock().unwrap_or_else(|e| e.into_inner())
        }
    }
}

struct LinkItem<P: Protocol> {
    deliver_at: tokio::time::Instant,
    to: ActorId,
    env: Envelope<P>,
}

/// Handle to a running kernel; cheap to clone.
pub struct Kernel<P: Protocol> {
    inner: Arc<Inner<P>>,
}

impl<P: Protocol> Clone for Kernel<P> {
    fn clone(&self) -> Self {
        Kernel { inner: Arc::clone(&self.inner) }
    }
}

/// Per-actor context passed into every `handle` call.
pub struct ActorContext<P: Protocol> {
    id: ActorId,
    shard: u32,
    kernel: Kernel<P>,
}

impl<P: Protocol> ActorContext<P> {
    pub fn id(&self) -> ActorId {
        self.id
    }

    pub fn shard(&self) -> u32 {
        self.shard
    }

    pub fn kernel(&self) -> &Kernel<P> {
        &self.kernel
    }

    /// The actor's local clock: the global monotone clock plus its shard's
    /// skew offset.
    pub fn now_local(&self) -> Nanos {
        self.kernel.inner.clock.local_now(self.shard)
    }

    pub fn send(&self, to: ActorId, msg: P::Msg) -> PendingReply<P::Reply> {
        self.kernel.send_from(Some(self.shard), to, msg)
    }

    pub fn tell(&self, to: ActorId, msg: P::Msg) {
        self.kernel.tell_from(Some(self.shard), to, msg);
    }

    pub fn publish(&self, cell: CellId, msg: P::Msg) -> usize {
        self.kernel.publish_from(Some(self.shard), cell, msg)
    }

    pub fn subscribe(&self, cell: CellId, who: ActorId) {
        self.kernel.subscribe(cell, who);
    }

    pub fn unsubscribe(&self, cell: CellId, who: ActorId) {
        self.kernel.unsubscribe(cell, who);
    }

    pub fn trace(&self, event: crate::trace::TraceEvent) {
        self.kernel.inner.trace.push(Some(self.shard), event);
    }
}

impl<P: Protocol> Kernel<P> {
    /// Builds and starts a kernel: one worker pool per shard, actors created
    /// on demand by the per-kind factories, routed to shards by `router`.
    pub fn start(
        cfg: KernelConfig,
        router: Router,
        factories: HashMap<ActorKind, Factory<P>>,
        trace: TraceSink,
    ) -> Self {
        let clock = Clock::new(cfg.shards, cfg.max_clock_skew, cfg.seed);
        Self::start_with_clock(cfg, router, factories, trace, clock)
    }

    /// Variant taking a pre-built clock, so callers can stamp setup events
    /// that precede the first activation.
    pub fn start_with_clock(
        cfg: KernelConfig,
        router: Router,
        factories: HashMap<ActorKind, Factory<P>>,
        trace: TraceSink,
        clock: Clock,
    ) -> Self {
        assert!(cfg.shards >= 1);
        let mut runtimes = Vec::with_capacity(cfg.shards as usize);
        let mut handles = Vec::with_capacity(cfg.shards as usize);
        for shard in 0..cfg.shards {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(cfg.threads_per_shard.max(1))
                .thread_name(format!("shard-{shard}"))
                .enable_time()
                .on_thread_start(move || CURRENT_SHARD.with(|s| s.set(Some(shard))))
                .build()
                .expect("failed to build shard runtime");
            handles.push(rt.handle().clone());
            runtimes.push(rt);
        }
        Kernel {
            inner: Arc::new(Inner {
                cfg,
                handles,
                runtimes: parking_lot_free::Mutex::new(runtimes),
                router,
                factories,
                actors: DashMap::new(),
                channels: DashMap::new(),
                links: DashMap::new(),
                clock,
                trace,
                timers: timer::TimerTable::new(),
                sent: AtomicU64::new(0),
                processed: AtomicU64::new(0),
                enqueued_by_kind: Default::default(),
                stopped: AtomicBool::new(false),
            }),
        }
    }

    pub fn clock(&self) -> &Clock {
        &self.inner.clock
    }

    pub fn trace_sink(&self) -> &TraceSink {
        &self.inner.trace
    }

    pub fn shards(&self) -> u32 {
        self.inner.cfg.shards
    }

    pub fn shard_of(&self, id: ActorId) -> u32 {
        (self.inner.router)(id)
    }

    /// Asynchronous request: enqueues and returns a pending reply handle.
    pub fn send(&self, to: ActorId, msg: P::Msg) -> PendingReply<P::Reply> {
        self.send_from(None, to, msg)
    }

    /// One-way message (no reply expected).
    pub fn tell(&self, to: ActorId, msg: P::Msg) {
        self.tell_from(None, to, msg);
    }

    fn send_from(&self, from_shard: Option<u32>, to: ActorId, msg: P::Msg) -> PendingReply<P::Reply> {
        let (tx, rx) = oneshot::channel();
        match self.deliver(from_shard, to, Envelope { msg, reply: Some(tx) }) {
            Ok(()) => PendingReply::waiting(rx),
            Err(e) => PendingReply::failed(e),
        }
    }

    fn tell_from(&self, from_shard: Option<u32>, to: ActorId, msg: P::Msg) {
        let _ = self.deliver(from_shard, to, Envelope { msg, reply: None });
    }

    /// Publishes an update on a cell's broadcast channel; returns the number
    /// of subscribers it was delivered to.
    pub fn publish(&self, cell: CellId, msg: P::Msg) -> usize {
        self.publish_from(None, cell, msg)
    }

    fn publish_from(&self, from_shard: Option<u32>, cell: CellId, msg: P::Msg) -> usize {
        let subscribers: Vec<ActorId> = match self.inner.channels.get(&cell) {
            Some(entry) => entry.clone(),
            None => return 0,
        };
        let mut count = 0;
        for who in subscribers {
            let env = Envelope { msg: msg.clone(), reply: None };
            if self.deliver(from_shard, who, env).is_ok() {
                count += 1;
            }
        }
        count
    }

    /// Adds `who` to the cell's channel. Idempotent; membership is effective
    /// once this returns.
    pub fn subscribe(&self, cell: CellId, who: ActorId) {
        let mut entry = self.inner.channels.entry(cell).or_default();
        if !entry.contains(&who) {
            entry.push(who);
        }
    }

    /// Removes `who` from the cell's channel; a no-op for non-members.
    pub fn unsubscribe(&self, cell: CellId, who: ActorId) {
        if let Some(mut entry) = self.inner.channels.get_mut(&cell) {
            entry.retain(|a| *a != who);
        }
    }

    pub fn subscriber_count(&self, cell: CellId) -> usize {
        self.inner.channels.get(&cell).map(|e| e.len()).unwrap_or(0)
    }

    pub fn subscribers(&self, cell: CellId) -> Vec<ActorId> {
        self.inner.channels.get(&cell).map(|e| e.clone()).unwrap_or_default()
    }

    /// Registers a repeating timer owned by an actor. Fire `k` lands at
    /// `k * interval` plus a uniform jitter from +-jitter, so consecutive
    /// fires are between `interval - 2 jitter` and `interval + 2 jitter`
    /// apart. Fires arrive as mailbox messages.
    pub fn register_timer(&self, owner: ActorId, interval: Duration, jitter: Duration) -> TimerId {
        assert!(interval > Duration::ZERO);
        timer::register(self, owner, interval, jitter)
    }

    pub fn cancel_timer(&self, id: TimerId) {
        self.inner.timers.cancel(id);
    }

    pub fn cancel_all_timers(&self) {
        self.inner.timers.cancel_all();
    }

    pub fn stats(&self) -> KernelStats {
        let mut by_kind = [0u64; 5];
        for (i, c) in self.inner.enqueued_by_kind.iter().enumerate() {
            by_kind[i] = c.load(Ordering::Relaxed);
        }
        KernelStats {
            sent: self.inner.sent.load(Ordering::Relaxed),
            processed: self.inner.processed.load(Ordering::Relaxed),
            enqueued_by_kind: by_kind,
        }
    }

    /// The set of live actors equals exactly the set of ids ever messaged.
    pub fn live_actors(&self) -> Vec<ActorId> {
        self.inner.actors.iter().map(|e| *e.key()).collect()
    }

    /// Waits until every sent message has been processed and no new work
    /// appears for two consecutive polls. Cancel timers first or this will
    /// not settle.
    pub async fn quiesce(&self, max_wait: Duration) -> Result<(), KernelError> {
        let deadline = tokio::time::Instant::now() + max_wait;
        let mut stable = 0;
        loop {
            let sent = self.inner.sent.load(Ordering::SeqCst);
            let processed = self.inner.processed.load(Ordering::SeqCst);
            if sent == processed {
                stable += 1;
                if stable >= 3 {
                    return Ok(());
                }
            } else {
                stable = 0;
            }
            if tokio::time::Instant::now() > deadline {
                return Err(KernelError::Timeout);
            }
            tokio::time::sleep(Duration::from_millis(1)).await;
        }
    }

    /// Stops the kernel: no further sends are accepted, timers are cancelled,
    /// actor tasks drain and exit, shard pools shut down.
    pub fn stop(&self) {
        self.inner.stopped.store(true, Ordering::SeqCst);
        self.inner.timers.cancel_all();
        self.inner.actors.clear();
        self.inner.links.clear();
        let runtimes: Vec<_> = self.inner.runtimes.lock().drain(..).collect();
        for rt in runtimes {
            rt.shutdown_background();
        }
    }

    fn deliver(&self, from_shard: Option<u32>, to: ActorId, env: Envelope<P>) -> Result<(), KernelError> {
        if self.inner.stopped.load(Ordering::Relaxed) {
            return Err(KernelError::KernelStopped);
        }
        let target_shard = (self.inner.router)(to);
        let latency = self.inner.cfg.cross_shard_latency;
        self.inner.sent.fetch_add(1, Ordering::SeqCst);
        self.inner.enqueued_by_kind[to.kind.index()].fetch_add(1, Ordering::Relaxed);
        match from_shard {
            Some(src) if src != target_shard && latency > Duration::ZERO => {
                self.link_to(src, target_shard).send(LinkItem {
                    deliver_at: tokio::time::Instant::now() + latency,
                    to,
                    env,
                })
                .map_err(|_| KernelError::KernelStopped)?;
                Ok(())
            }
            _ => self.enqueue(to, target_shard, env),
        }
    }

    fn enqueue(&self, to: ActorId, target_shard: u32, env: Envelope<P>) -> Result<(), KernelError> {
        let tx = self.mailbox_of(to, target_shard);
        tx.send(env).map_err(|_| KernelError::KernelStopped)
    }

    fn mailbox_of(&self, id: ActorId, shard: u32) -> mpsc::UnboundedSender<Envelope<P>> {
        if let Some(tx) = self.inner.actors.get(&id) {
            return tx.clone();
        }
        let entry = self.inner.actors.entry(id).or_insert_with(|| {
            let (tx, rx) = mpsc::unbounded_channel();
            self.spawn_actor(id, shard, rx);
            tx
        });
        entry.clone()
    }

    fn spawn_actor(&self, id: ActorId, shard: u32, mut rx: mpsc::UnboundedReceiver<Envelope<P>>) {
        let kernel = self.clone();
        let handle = self.inner.handles[shard as usize].clone();
        handle.spawn(async move {
            let factory = kernel
                .inner
                .factories
                .get(&id.kind)
                .unwrap_or_else(|| panic!("no factory registered for {:?}", id.kind));
            let mut actor = factory(id);
            let ctx = ActorContext { id, shard, kernel: kernel.clone() };
            while let Some(env) = rx.recv().await {
                let replier = Replier::new(env.reply);
                actor.handle(&ctx, env.msg, replier).await;
                kernel.inner.processed.fetch_add(1, Ordering::SeqCst);
            }
        });
    }

    /// Cross-shard delivery pipe: a single task per (src, dst) pair preserves
    /// sender-to-receiver FIFO while imposing the configured latency.
    fn link_to(&self, src: u32, dst: u32) -> mpsc::UnboundedSender<LinkItem<P>> {
        if let Some(tx) = self.inner.links.get(&(src, dst)) {
            return tx.clone();
        }
        let entry = self.inner.links.entry((src, dst)).or_insert_with(|| {
            let (tx, mut rx) = mpsc::unbounded_channel::<LinkItem<P>>();
            let kernel = self.clone();
            self.inner.handles[dst as usize].spawn(async move {
                while let Some(item) = rx.recv().await {
                    tokio::time::sleep_until(item.deliver_at).await;
                    let shard = kernel.shard_of(item.to);
                    let _ = kernel.enqueue(item.to, shard, item.env);
                }
            });
            tx
        });
        entry.clone()
    }
}

pub(crate) fn kernel_handles<P: Protocol>(k: &Kernel<P>) -> Vec<tokio::runtime::Handle> {
    k.inner.handles.clone()
}

pub(crate) fn timer_table<P: Protocol>(k: &Kernel<P>) -> &timer::TimerTable {
    &k.inner.timers
}

pub(crate) fn deliver_timer_fire<P: Protocol>(k: &Kernel<P>, shard: u32, owner: ActorId, id: TimerId) {
    let _ = k.deliver(Some(shard), owner, Envelope { msg: P::timer_msg(id), reply: None });
}
