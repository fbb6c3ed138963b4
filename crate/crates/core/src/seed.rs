//! Seed derivation helpers.
//!
//! Every stochastic component takes an explicit `u64` seed. Sub-streams are
//! derived by mixing a base seed with a tag so that runs stay reproducible
//! while independent components never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a stream tag.
pub fn derive(base: u64, tag: u64) -> u64 {
    mix(base ^ mix(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
