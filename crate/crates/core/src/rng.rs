//! Seed derivation. Every random draw in a trial comes from a substream
//! keyed by `(seed, tag)` so that adding draws to one stage never shifts
//! another stage's numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Order-sensitive hash of a sequence of words. Stable across builds and
/// platforms, unlike `std::hash`.
pub fn stable_hash(words: &[u64]) -> u64 {
    words.iter().fold(0x6A09_E667_F3BC_C908, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

pub fn tag_of(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn substream(seed: u64, tag: &str) -> TrialRng {
    TrialRng::seed_from_u64(stable_hash(&[seed, tag_of(tag)]))
}

pub fn rng_from_seed(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}
