//! Stable hashing for bucketing and RNG substream derivation.
//!
//! Everything goes through XXH3-64 with seed 0, so assignments and random
//! streams are identical across platforms, runs and library versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64;

/// XXH3-64 of `salt` followed by the little-endian bytes of `key`.
pub fn salted_hash(salt: &[u8], key: u64) -> u64 {
    let mut buf = Vec::with_capacity(salt.len() + 8);
    buf.extend_from_slice(salt);
    buf.extend_from_slice(&key.to_le_bytes());
    xxh3_64(&buf)
}

/// XXH3-64 over a sequence of words.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut buf = Vec::with_capacity(words.len() * 8);
    for w in words {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    xxh3_64(&buf)
}

/// Maps a hash to `[0, 1)` using its top 53 bits.
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent random stream for `(seed, tags...)`.
pub fn substream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut words = Vec::with_capacity(tags.len() + 1);
    words.push(seed);
    words.extend_from_slice(tags);
    ChaCha8Rng::seed_from_u64(hash_words(&words))
}

/// Stream tags, kept distinct so substreams never collide.
pub(crate) mod tag {
    pub const WORLD: u64 = 1;
    pub const INJECT: u64 = 2;
    pub const TRAFFIC: u64 = 3;
    pub const SERVE: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const REWARD: u64 = 7;
}
