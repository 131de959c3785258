//! Named random substreams.
//!
//! Every random draw in the toolkit comes from a ChaCha stream whose key is a
//! SHA-256 digest of a master seed, a stream name, and a list of coordinates.
//! Two streams with different coordinates are independent, and any single
//! stream can be rebuilt in isolation, so results do not depend on the order
//! or the thread in which work is executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Key for a deterministic random substream.
#[derive(Debug, Clone)]
pub struct Substream {
    hasher: Sha256,
}

impl Substream {
    pub fn new(master_seed: u64, name: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"rankrefine.substream.v1");
        hasher.update(master_seed.to_le_bytes());
        hasher.update((name.len() as u64).to_le_bytes());
        hasher.update(name.as_bytes());
        Substream { hasher }
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.hasher.update([0u8]);
        self.hasher.update(index.to_le_bytes());
        self
    }

    pub fn with_str(mut self, key: &str) -> Self {
        self.hasher.update([1u8]);
        self.hasher.update((key.len() as u64).to_le_bytes());
        self.hasher.update(key.as_bytes());
        self
    }

    pub fn with_f64(self, value: f64) -> Self {
        self.with_index(value.to_bits())
    }

    pub fn seed(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    /// Folds the key down to a `u64`, for configs that carry a plain seed.
    pub fn seed_u64(&self) -> u64 {
        let digest = self.seed();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed())
    }
}
