//! Per-purpose RNG stream derivation from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Sub-seed for `purpose` under `master`: the first eight bytes of
/// `SHA-256(master_le || purpose)`. Streams for different purposes are
/// independent, so adding a consumer never shifts another one.
pub fn derive(master: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(master: u64, purpose: &str) -> ChaCha8Rng {
    rng(derive(master, purpose))
}
