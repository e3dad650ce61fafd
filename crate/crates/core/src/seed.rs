//! Stream derivation for disorder sampling.
//!
//! Every disorder variable `xi(s, key)` at size `N` is drawn from its own
//! generator, seeded by folding the master seed, a stable hash of the index
//! tuple `s`, `N` and the projection key through the SplitMix64 finalizer:
//!
//! ```text
//! h = mix64(master)
//! h = mix64(h ^ index_hash(s))
//! h = mix64(h ^ N)
//! h = mix64(h ^ key)
//! ```
//!
//! The construction depends only on integer arithmetic, so realizations are
//! identical across platforms, thread counts and chunkings. Two indices with
//! the same block tuple share their values, which is what makes a BKM chain
//! and the corresponding GREM sample identical tables.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// SplitMix64 output finalizer (Stafford's "Mix13").
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the 1-based block labels of an index, each followed by a separator.
pub fn index_hash(blocks: &[usize]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in blocks {
        for byte in ((b as u64) + 1).to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
        h ^= 0xff;
        h = h.wrapping_mul(PRIME);
    }
    h
}

#[inline]
pub fn stream_seed(master: u64, index_hash: u64, n_spins: u32, key: u64) -> u64 {
    let mut h = mix64(master);
    h = mix64(h ^ index_hash);
    h = mix64(h ^ n_spins as u64);
    mix64(h ^ key)
}

#[inline]
pub fn stream(master: u64, index_hash: u64, n_spins: u32, key: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(stream_seed(master, index_hash, n_spins, key))
}

/// Seed of replica `r` derived from an experiment seed.
pub fn replica_seed(master: u64, replica: u64) -> u64 {
    mix64(mix64(master) ^ mix64(replica.wrapping_add(1)))
}
