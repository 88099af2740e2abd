//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha20 keyed by the 64-bit
//! experiment seed, with the 64-bit ChaCha stream id selecting an
//! independent substream. ChaCha is counter based, so run `k` of a
//! multistart batch reads stream `k` regardless of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream ids used outside multistart batches. Multistart runs use their
/// run index directly, so these sit at the top of the id space.
pub mod streams {
    pub const STATE_SAMPLES: u64 = u64::MAX - 1;
    pub const OBSERVABLES: u64 = u64::MAX - 2;
    pub const INITIAL_STATE: u64 = u64::MAX - 3;
    pub const RANK_POINTS: u64 = u64::MAX - 4;
    pub const LEVEL_SET: u64 = u64::MAX - 5;
    pub const CONCAVITY: u64 = u64::MAX - 6;
    /// Fixed offset direction for Hessian probing (seed 0).
    pub const HESSIAN_PROBE: u64 = u64::MAX - 7;
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
