//! Seeded random substreams.
//!
//! All randomness descends from one root seed. Each purpose (file contents,
//! channel states, trials, Monte Carlo gains) gets its own 64-bit key, and
//! within a purpose every index (file id, block number, sample chunk) gets
//! its own ChaCha stream. Any single draw is a pure function of
//! `(root seed, purpose, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Files = 1,
    States = 2,
    Trials = 3,
    Gains = 4,
    Demands = 5,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of a purpose-specific substream of `seed`.
pub fn substream(seed: u64, purpose: Purpose) -> u64 {
    mix64(seed ^ mix64(purpose as u64))
}

/// Generator for element `index` of the stream keyed by `key`.
pub fn stream_rng(key: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
