//! Deterministic, splittable random number generation.
//!
//! All randomness in the crate flows from a single root seed through named
//! substreams, so every operation is reproducible bit-for-bit regardless of
//! execution order or parallelism. A substream is identified by a textual tag
//! plus an index; the pair is mixed into the root seed with FNV-1a and
//! SplitMix64 and the result seeds a ChaCha8 stream cipher generator.
//!
//! Normal variates are drawn through `rand_distr`'s ziggurat implementation,
//! which is pure integer/float arithmetic and therefore platform-independent.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the 64-bit seed of the substream `(tag, index)` under `root`.
pub fn substream_seed(root: u64, tag: &str, index: u64) -> u64 {
    let mixed = root ^ fnv1a(tag.as_bytes()).wrapping_add(index.wrapping_mul(FNV_PRIME));
    splitmix64(splitmix64(mixed))
}

/// A fresh deterministic generator for the substream `(tag, index)`.
pub fn substream(root: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(root, tag, index))
}
