//! Seeded, per-consumer random streams.
//!
//! Every consumer (a switch queue's marker, a workload generator, an impaired
//! link) owns its own stream so that adding a consumer never shifts the draws
//! seen by the others.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-id namespaces for the simulator's consumers.
pub mod stream {
    pub const ECN_MARK: u64 = 1;
    pub const WORKLOAD: u64 = 2;
    pub const PLACEMENT: u64 = 3;
    pub const LINK_LOSS: u64 = 4;
    pub const ENTROPY: u64 = 5;
    pub const SACK_LOSS: u64 = 6;
}

/// 64-bit finalizer from SplitMix64; used for stream-id derivation and ECMP.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a namespace and an index into a stream id.
pub fn stream_id(namespace: u64, index: u64) -> u64 {
    mix64(namespace.wrapping_mul(0x100_0000_01b3) ^ mix64(index))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo < hi);
        let u: f64 = self.rng.gen();
        let x = lo + u * (hi - lo);
        // lo + u*(hi-lo) can round up to hi when the interval is tiny.
        if x >= hi {
            hi.next_down().max(lo)
        } else {
            x
        }
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}
