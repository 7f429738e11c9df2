//! Counter-based random number streams.
//!
//! Every trial draws from a stream keyed by `(master seed, trial index)` so
//! that results do not depend on scheduling or worker count. Substreams
//! (e.g. the per-tile increment sequences of the coupled processes) hang off
//! a trial stream by an extra key.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one reproducible stream of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShuffleStream {
    pub seed: u64,
    pub index: u64,
}

impl ShuffleStream {
    pub fn new(seed: u64, index: u64) -> Self {
        ShuffleStream { seed, index }
    }

    /// The generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(mix(self.index, 0));
        rng
    }

    /// An independent substream of this stream.
    pub fn substream(&self, key: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(mix(self.index, key.wrapping_add(1)));
        rng
    }
}

/// SplitMix64-style avalanche of a (index, key) pair into a stream id.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(b)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
