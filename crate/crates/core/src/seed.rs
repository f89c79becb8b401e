//! Deterministic derivation of independent random streams.
//!
//! Every stream is keyed by the master seed plus a domain tag and a path of
//! integers or strings, hashed with SHA-256. The same key always gives the
//! same stream regardless of iteration order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct StreamKey {
    hasher: Sha256,
}

impl StreamKey {
    pub fn new(master_seed: u64, domain: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update((domain.len() as u64).to_le_bytes());
        hasher.update(domain.as_bytes());
        Self { hasher }
    }

    pub fn index(mut self, value: u64) -> Self {
        self.hasher.update([0u8]);
        self.hasher.update(value.to_le_bytes());
        self
    }

    pub fn name(mut self, value: &str) -> Self {
        self.hasher.update([1u8]);
        self.hasher.update((value.len() as u64).to_le_bytes());
        self.hasher.update(value.as_bytes());
        self
    }

    pub fn seed(self) -> [u8; 32] {
        let digest = self.hasher.finalize();
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    pub fn stream(self) -> Stream {
        Stream::from_seed(self.seed())
    }
}
