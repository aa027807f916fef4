//! Seed derivation for independent, order-free random streams.
//!
//! Every random draw in the simulator is keyed by an explicit seed plus a
//! purpose tag and indices, so results never depend on worker scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_UES: u64 = 0x5545_5f44_524f_5053;
pub const TAG_SHADOWING: u64 = 0x5348_4144_4f57_0000;
pub const TAG_OCCUPANCY: u64 = 0x4f43_4355_5041_4e43;
pub const TAG_SNAPSHOT: u64 = 0x534e_4150_5348_4f54;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with any number of tags/indices into a new 64-bit seed.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}
