//! Seed plumbing. Every random stream in a run is derived from the run seed
//! plus a fixed label, so independent components never share a stream and
//! runs are reproducible from `(config, seed)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a stream label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = mix(base);
    for b in label.bytes() {
        h = mix(h ^ u64::from(b));
    }
    h
}

/// Derives a child seed from `base`, a label and an index (epoch, stack, repeat).
pub fn derive_indexed(base: u64, label: &str, index: u64) -> u64 {
    mix(derive_seed(base, label) ^ mix(index))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
