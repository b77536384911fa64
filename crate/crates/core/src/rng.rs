//! Seed derivation. Every random stream in a campaign is a ChaCha8 generator
//! keyed by `(base seed, purpose, index)`, so a stream never depends on how
//! many draws another stream made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams used by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Visitor = 1,
    Reward = 2,
    StaticPolicy = 3,
    Projection = 4,
    Replication = 5,
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    mix(mix(mix(base) ^ stream as u64) ^ index)
}

pub fn stream_rng(base: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, index))
}
