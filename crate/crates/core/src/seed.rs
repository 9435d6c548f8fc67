//! Root-seed handling.
//!
//! Every stochastic component draws from a named sub-stream of one root
//! seed, so a component can be re-run on its own and still see the same
//! random numbers it saw inside the full pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    root: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// A child stream identified by `name`; derivation is platform independent.
    pub fn derive(&self, name: &str) -> SeedStream {
        let mut hasher = Sha256::new();
        hasher.update(self.root.to_le_bytes());
        hasher.update(name.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        SeedStream::new(u64::from_le_bytes(bytes))
    }

    pub fn derive_index(&self, name: &str, index: u64) -> SeedStream {
        self.derive(&format!("{name}/{index}"))
    }

    pub fn rng(&self) -> Rng {
        Rng::seed_from_u64(self.root)
    }
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
