//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers for [`derive_seed`].
pub mod stream {
    pub const CLASSIFIER_INIT: u64 = 1;
    pub const AUGMENTER_INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const AUGMENT: u64 = 5;
    pub const DATA_POOL: u64 = 6;
    pub const DATA_TEST: u64 = 7;
    pub const SPLIT: u64 = 8;
}

/// Mixes a run seed with a stream id (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    seeded(derive_seed(seed, stream))
}
