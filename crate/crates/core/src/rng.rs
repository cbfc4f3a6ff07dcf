//! Reproducible random streams.
//!
//! Every replicate `k` of an ensemble draws from its own ChaCha8 stream seeded
//! with [`split_seed`]`(master, k)`. ChaCha8 output is specified bit-for-bit, so
//! a given master seed reproduces the same ensemble on any machine and with any
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used throughout the crate.
pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `k` under master seed `master`:
/// `mix64(master + 0x9e3779b97f4a7c15 * (k + 1))` with wrapping arithmetic.
#[inline]
pub fn split_seed(master: u64, k: u64) -> u64 {
    mix64(master.wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(k.wrapping_add(1))))
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_stream(master: u64, k: u64) -> Stream {
    stream(split_seed(master, k))
}
