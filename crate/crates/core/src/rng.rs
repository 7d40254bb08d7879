//! Seed handling. Every random operation takes an explicit `u64` seed;
//! child streams (per block, per ensemble member) are derived by index so
//! results do not depend on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Generator for `seed`.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives the seed of child stream `index` of `seed`.
///
/// Uses ChaCha's independent stream selector, so distinct indices give
/// non-overlapping sequences.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}
