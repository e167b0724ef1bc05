//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes an explicit `&mut Stream`. Independent
//! streams are derived from a root seed plus a path of indices (for example
//! `(method, budget, repetition)`), so parallel repetitions never share state
//! and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// Stream for a bare seed (stream id 0).
pub fn stream(seed: u64) -> Stream {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stream keyed by `seed` and an index path; distinct paths select distinct
/// ChaCha stream ids under the same key.
pub fn derive_stream(seed: u64, path: &[u64]) -> Stream {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_id(path));
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn path_id(path: &[u64]) -> u64 {
    // Length is folded in so that [] and [0] differ.
    path.iter().fold(splitmix64(path.len() as u64), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}
