//! Process-wide monotone clock with optional per-shard skew offsets, modeling
//! loosely synchronized server clocks.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roam_core::Nanos;

/// Readings start at one second so skewed local clocks never underflow zero.
const BASE_NS: Nanos = 1_000_000_000;

pub struct Clock {
    start: Instant,
    skew: Vec<i64>,
}

impl Clock {
    pub fn new(shards: u32, max_skew: Duration, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc10c);
        let max = max_skew.as_nanos() as i64;
        let skew = (0..shards)
            .map(|_| if max == 0 { 0 } else { rng.gen_range(-max..=max) })
            .collect();
        Clock { start: Instant::now(), skew }
    }

    /// Global monotone reading in nanoseconds.
    pub fn now(&self) -> Nanos {
        BASE_NS + self.start.elapsed().as_nanos() as Nanos
    }

    /// A shard's local reading: the global clock plus that shard's skew.
    pub fn local_now(&self, shard: u32) -> Nanos {
        let skew = self.skew_of(shard);
        let now = self.now() as i64 + skew;
        now.max(0) as Nanos
    }

    pub fn skew_of(&self, shard: u32) -> i64 {
        self.skew.get(shard as usize).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_offsets_are_bounded_and_stable() {
        let max = Duration::from_millis(5);
        let clock = Clock::new(8, max, 42);
        for shard in 0..8 {
            let skew = clock.skew_of(shard);
            assert!(skew.abs() <= max.as_nanos() as i64, "shard {shard}: {skew}");
            assert_eq!(skew, clock.skew_of(shard), "skew must be constant per shard");
        }
        // With several shards, at least one pair differs.
        assert!((1..8).any(|s| clock.skew_of(s) != clock.skew_of(0)));
        // Local readings track the global clock plus the offset.
        let shard = 3;
        let before = clock.now();
        let local = clock.local_now(shard);
        let after = clock.now();
        let skew = clock.skew_of(shard);
        assert!(local as i64 >= before as i64 + skew);
        assert!(local as i64 <= after as i64 + skew);
        // Zero-skew clocks read identically on all shards.
        let flat = Clock::new(4, Duration::ZERO, 7);
        assert!((0..4).all(|s| flat.skew_of(s) == 0));
    }
}
