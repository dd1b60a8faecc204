//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 stream keyed by the
//! run seed and a stream id. ChaCha is counter based, so a stream id picks an
//! independent sequence and results do not depend on the order in which
//! clusters or stages are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Stream id namespaces. Per-item streams add the item index to the base.
pub mod ids {
    pub const CENTROIDS: u64 = 1;
    pub const ACTIVATION: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const CORPUS: u64 = 4;
    pub const CLUSTER_BASE: u64 = 1 << 32;
    pub const BRAND_BASE: u64 = 2 << 32;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, stream: u64) -> StreamRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}
