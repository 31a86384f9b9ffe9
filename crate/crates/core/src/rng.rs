//! Seeded random streams.
//!
//! Every random decision in the pipeline draws from a stream derived from
//! the master seed and a tuple of integer tags, so results never depend on
//! evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Tags separating the independent consumers of the master seed.
pub mod tag {
    pub const TEXTURE: u64 = 1;
    pub const SEQUENCE: u64 = 2;
    pub const DETECT: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const VERIFICATION: u64 = 5;
    pub const RETRIEVAL: u64 = 6;
    pub const BRIEF: u64 = 7;
    pub const SWEEP: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a master seed and a tag path into a single 64-bit seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn substream(master: u64, tags: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, tags))
}

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}
