//! Deterministic seed streams.
//!
//! Every random draw in the toolkit descends from one master seed. A stage
//! derives its own seed as the first eight bytes (little endian) of
//! SHA-256(master seed as 8 little-endian bytes ‖ stream label), e.g. the
//! label `"folds/manufacturing"` or `"forest/tree/17"`. Stages can therefore
//! be re-run independently and in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stream.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_for(master: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
