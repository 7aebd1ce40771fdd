//! Seed derivation.
//!
//! Every random stream is a ChaCha8 generator whose 64-bit seed is derived
//! from `(global seed, purpose tag, indices)` by FNV-1a hashing the tag and
//! folding everything through the SplitMix64 finalizer
//! (constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

pub fn derive_seed(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(tag));
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, tag: &str, indices: &[u64]) -> Rng {
    rng_from(derive_seed(seed, tag, indices))
}
