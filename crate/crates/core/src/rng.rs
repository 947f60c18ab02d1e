//! Seed derivation for reproducible, independently-streamed randomness.
//!
//! Every stochastic operation in this crate consumes a ChaCha8 generator.
//! Experiment code derives one stream per (trial, purpose) pair from a single
//! master seed, so trials can run concurrently in any order and still produce
//! bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of purpose slots reserved per trial stream block.
pub const STREAMS_PER_TRIAL: u64 = 64;

/// Purpose offsets within a trial's stream block.
pub mod purpose {
    pub const GRAPH: u64 = 0;
    pub const FEATURES: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const DROP_EDGES: u64 = 3;
    /// Base offset for per-method model seeds; add a method slot in 0..56.
    pub const MODEL_BASE: u64 = 8;
}

/// ChaCha8 generator on an independent stream of the master seed.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Stream id for a (trial, purpose) pair.
pub fn trial_stream(trial: u64, purpose: u64) -> u64 {
    trial * STREAMS_PER_TRIAL + purpose
}

/// Collapses a (master, stream) pair into a single 64-bit seed for APIs that
/// take a plain seed. SplitMix64 finalizer keeps distinct inputs decorrelated.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
