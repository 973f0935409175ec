//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from the experiment's root seed through [`mix`], so runs are
//! reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one well-distributed seed. Order matters.
pub fn mix(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used with [`mix`].
pub mod stream {
    pub const INIT: u64 = 1;
    pub const PRETRAIN_ORDER: u64 = 2;
    pub const PRETRAIN_DROPOUT: u64 = 3;
    pub const EPOCH_ORDER: u64 = 4;
    pub const TRAIN_DROPOUT: u64 = 5;
    pub const MC_DROPOUT: u64 = 6;
    pub const REFRESH_MC: u64 = 7;
    pub const GENERATOR: u64 = 8;
    pub const NOISE: u64 = 9;
}
