//! Per-episode random streams.
//!
//! Every episode draws from its own ChaCha stream keyed by the master seed,
//! with the episode index selecting the stream. Episodes can therefore run in
//! any order (or in parallel) and still see exactly the same randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifier: `(master_seed, episode_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpisodeRng {
    pub master_seed: u64,
    pub episode_index: u64,
}

impl EpisodeRng {
    pub fn new(master_seed: u64, episode_index: u64) -> Self {
        Self {
            master_seed,
            episode_index,
        }
    }

    /// Materialize the generator for this stream.
    pub fn stream(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.episode_index);
        rng
    }
}

/// Shorthand for `EpisodeRng::new(seed, index).stream()`.
pub fn episode_stream(master_seed: u64, episode_index: u64) -> ChaCha8Rng {
    EpisodeRng::new(master_seed, episode_index).stream()
}

/// Derive an independent sub-seed, e.g. one per pipeline phase.
///
/// SplitMix64 finalizer over `seed ^ salt`; distinct salts give unrelated seeds.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
