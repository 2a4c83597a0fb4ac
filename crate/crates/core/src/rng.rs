//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng` seeded
//! from `derive_seed(run_seed, tag)` so that independent consumers never share
//! a stream and results are reproducible from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer applied to `seed ^ tag * φ`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Stream tags used by the training loop.
pub mod tags {
    pub const ENC_S: u64 = 1;
    pub const DEC_S: u64 = 2;
    pub const ENC_T: u64 = 3;
    pub const DEC_T: u64 = 4;
    pub const SHUFFLE_S: u64 = 5;
    pub const SHUFFLE_T: u64 = 6;
    pub const RV_SPLIT: u64 = 7;
    pub const LIPSCHITZ_PAIRS: u64 = 8;
}
