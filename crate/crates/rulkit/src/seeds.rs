//! Deterministic seed derivation.
//!
//! Every randomized stage of an experiment (model initialization, batch
//! shuffling, evolutionary search, synthetic data) draws its seed from one
//! master seed, a stage name, and an index. Runs with the same master seed
//! therefore reproduce exactly, while distinct stages and repetition indices
//! get decorrelated streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a stage label, and an index.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(stage.as_bytes()).rotate_left(17) ^ index.wrapping_mul(GOLDEN))
}

/// A ChaCha stream seeded by [`derive_seed`].
pub fn rng_for(master: u64, stage: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stage, index))
}
