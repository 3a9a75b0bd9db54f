//! Deterministic seed derivation.
//!
//! Replication `r` of a run with master seed `s` uses
//! `derive(s, r) = splitmix64(splitmix64(s) ^ (r + 1) * 0x9E3779B97F4A7C15)`.
//! Only wrapping 64-bit integer arithmetic is involved, so the derived seeds
//! are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

/// RNG for stream `index` under `master`.
pub fn rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, index))
}
