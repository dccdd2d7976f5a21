//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a `ChaCha8Rng` (rand_chacha
//! 0.9) built by [`stream`]. The 64-bit seed is expanded with
//! `SeedableRng::seed_from_u64`, and independent consumers inside one call
//! are separated with ChaCha's 64-bit stream id rather than by drawing from a
//! shared generator, so adding a draw in one stream never shifts another.
//!
//! Stream ids in use:
//!
//! | id | consumer |
//! |----|----------|
//! | 0  | label-dependent features, class assignment |
//! | 1  | pure-noise feature columns |
//! | 2  | additive label noise and row shuffling |
//! | 3  | permutation-test reorderings |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SIGNAL: u64 = 0;
pub const STREAM_NOISE: u64 = 1;
pub const STREAM_AUX: u64 = 2;
pub const STREAM_PERMUTATION: u64 = 3;

/// Generator for `(seed, stream_id)`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives a child seed from a parent seed and a list of coordinates
/// (splitmix64 finalizer folded over the inputs).
pub fn derive_seed(parent: u64, coords: &[u64]) -> u64 {
    let mut state = mix(parent ^ 0x9E37_79B9_7F4A_7C15);
    for &c in coords {
        state = mix(state ^ mix(c.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    state
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
