//! Seeded, platform-independent randomness.
//!
//! Every random choice in the crate (tree split dimensions, synthetic data,
//! train/query splits) draws from ChaCha8, whose output stream is fixed by
//! its specification and does not depend on the platform or word size.
//! Independent sub-streams are derived from one user seed with SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PortableRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> PortableRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `stream`-th independent sub-stream of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer over the combined state
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
