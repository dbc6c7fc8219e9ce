//! Seed derivation so that parallel and serial runs draw identical streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a global seed with any number of stream coordinates.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    seeded(derive_seed(seed, parts))
}

/// `n` draws from U[0, 1) on the given stream.
pub fn uniform_vec(seed: u64, parts: &[u64], n: usize) -> Vec<f64> {
    let mut r = stream(seed, parts);
    (0..n).map(|_| r.gen()).collect()
}

/// Stable 64-bit FNV-1a hash of a string, for hashing node ids into batches.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}
