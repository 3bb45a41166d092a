//! Deterministic sub-seeding: independent streams keyed by a tag and a key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// RNG for the stream `(seed, tag, key)`.
pub fn derived_rng(seed: u64, tag: &str, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// A 64-bit seed for the stream `(seed, tag, index)`.
pub fn derived_seed(seed: u64, tag: &str, index: u64) -> u64 {
    use rand::RngCore;
    derived_rng(seed, tag, &index.to_string()).next_u64()
}
