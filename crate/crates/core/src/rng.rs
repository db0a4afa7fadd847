//! Counter-based seed derivation.
//!
//! Every random draw in a run comes from a ChaCha stream whose seed is a pure
//! function of the run seed and a tuple of counters (stream tag, iteration,
//! individual, ...). Nothing carries mutable generator state between
//! iterations, so a run can be resumed from its counters alone and
//! population members can be sampled in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep unrelated consumers of randomness apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InnerNoise = 1,
    MetaNoise = 2,
    Lookahead = 3,
    Bayes = 4,
    Init = 5,
    Task = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of words into a single 64-bit seed.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix(base), |acc, &w| splitmix(acc ^ splitmix(w)))
}

pub fn stream_seed(base: u64, stream: Stream, words: &[u64]) -> u64 {
    let mut all = Vec::with_capacity(words.len() + 1);
    all.push(stream as u64);
    all.extend_from_slice(words);
    derive_seed(base, &all)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
