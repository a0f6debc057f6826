//! Deterministic per-replica random streams.
//!
//! Replica r of an experiment with master seed s draws from a ChaCha8 stream
//! keyed by `mix(s, r)`, so results do not depend on how replicas are
//! scheduled across worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; a solid 64-bit mixer for seed derivation.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for replica `replica` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed) ^ splitmix64(replica.wrapping_add(0x517c_c1b7_2722_0a95)));
    ChaCha8Rng::seed_from_u64(key)
}
