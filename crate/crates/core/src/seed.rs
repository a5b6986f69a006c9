//! Seed derivation.
//!
//! Every random stream in the toolkit is seeded from a master seed through
//! [`derive_seed`]: the master seed and a path of integer tags (stage id,
//! seed-sweep index, model index, ...) are folded through the SplitMix64
//! finalizer. The same path always yields the same stream, so work can be
//! scheduled in any order or on any number of threads without changing
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags used when deriving seeds; kept in one place so the counter
/// scheme is documented alongside the code that relies on it.
pub mod stage {
    pub const PARTITION: u64 = 1;
    pub const TARGET: u64 = 2;
    pub const SHADOW: u64 = 3;
    pub const ATTACK_MODEL: u64 = 4;
    pub const REFERENCE: u64 = 5;
    pub const POPULATION_SAMPLE: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
    pub const FEDERATED: u64 = 8;
    pub const SHARDS: u64 = 9;
    pub const TRANSFER: u64 = 10;
    pub const SWEEP: u64 = 11;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a path of tags.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

/// Deterministic RNG for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
