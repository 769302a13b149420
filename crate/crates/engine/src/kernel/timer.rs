//! Repeating per-actor timers. Fires are delivered as ordinary mailbox
//! messages, so they serialize with the owner's other work. Jitter models the
//! loosely synchronized clocks that drive snapshot rounds: fire `k` lands at
//! `k * interval + U(-jitter, +jitter)` from registration.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ActorId, Kernel, Protocol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimerId(pub u64);

#[derive(Default)]
pub(crate) struct TimerTable {
    next: AtomicU64,
    tasks: DashMap<TimerId, tokio::task::AbortHandle>,
}

impl TimerTable {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn cancel(&self, id: TimerId) {
        if let Some((_, handle)) = self.tasks.remove(&id) {
            handle.abort();
        }
    }

    pub(crate) fn cancel_all(&self) {
        let ids: Vec<TimerId> = self.tasks.iter().map(|e| *e.key()).collect();
        for id in ids {
            self.cancel(id);
        }
    }
}

pub(crate) fn register<P: Protocol>(
    kernel: &Kernel<P>,
    owner: ActorId,
    interval: Duration,
    jitter: Duration,
) -> TimerId {
    let table = super::timer_table(kernel);
    let id = TimerId(table.next.fetch_add(1, Ordering::Relaxed));
    let shard = kernel.shard_of(owner);
    let handle = super::kernel_handles(kernel)[shard as usize].clone();
    let kernel = kernel.clone();
    let task_kernel = kernel.clone();
    let join = handle.spawn(async move {
        let base = tokio::time::Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(id.0 ^ owner.key.rotate_left(17));
        let jitter_ns = jitter.as_nanos() as i64;
        let mut k: u32 = 1;
        loop {
            let offset = if jitter_ns == 0 { 0 } else { rng.gen_range(-jitter_ns..=jitter_ns) };
            let at_ns = (interval.as_nanos() as i64 * k as i64 + offset).max(0) as u64;
            tokio::time::sleep_until(base + Duration::from_nanos(at_ns)).await;
            super::deliver_timer_fire(&task_kernel, shard, owner, id);
            k += 1;
        }
    });
    super::timer_table(&kernel).tasks.insert(id, join.abort_handle());
    id
}
