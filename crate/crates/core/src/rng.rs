//! Seeded random streams.
//!
//! Every stochastic operation takes an explicit generator. Independent parts of
//! an experiment draw from distinct ChaCha8 streams of the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers used across the crate, so that unrelated consumers never
/// share a substream.
pub mod streams {
    pub const GEN_INIT: u64 = 1;
    pub const DISC_INIT: u64 = 2;
    pub const TRAINING: u64 = 3;
    pub const SPLIT_TRAIN: u64 = 10;
    pub const SPLIT_ADVERSARY: u64 = 11;
    pub const SPLIT_TEST: u64 = 12;
    pub const WORST_DISC: u64 = 20;
    pub const WORST_GEN: u64 = 21;
    pub const TEST_LATENT: u64 = 22;
    pub const SELECTION_LATENT: u64 = 23;
    pub const QUALITY: u64 = 30;
}

/// Generator for substream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a child index into a seed (SplitMix64 finalizer), for per-item seeds.
pub fn derive_seed(seed: u64, child: u64) -> u64 {
    let mut z = seed
        ^ child
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
