//! Seeded random streams.
//!
//! All randomness in the crate flows from explicit `u64` seeds. Independent
//! sub-streams (per trial, per crawler, per bootstrap replicate) are derived by
//! mixing the parent seed with a path of indices, so results do not depend on
//! the order in which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CrateRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> CrateRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic child seed for `parent` along `path`.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(parent), |acc, &p| splitmix(acc ^ splitmix(p.wrapping_add(0x9e37_79b9))))
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
