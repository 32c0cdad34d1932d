//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value derived from the master seed and a path of integer labels. The
//! mixing is SplitMix64 so it is stable across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels used with [`derive`].
pub mod stream {
    pub const INIT: u64 = 0x1001;
    pub const TRAIN: u64 = 0x2002;
    pub const VALIDATION: u64 = 0x3003;
    pub const DATA: u64 = 0x4004;
    pub const PV: u64 = 0x5005;
    pub const LOAD: u64 = 0x6006;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `labels` into `base`. Distinct label paths give unrelated seeds.
pub fn derive(base: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(base), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
