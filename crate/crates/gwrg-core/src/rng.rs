//! Splittable random streams for scheduling-independent reproducibility.
//!
//! Every random decision in the crate draws from a [`StreamKey`]: a 256-bit
//! state derived by hashing the master seed, a textual label, and a path of
//! integer indices. Child keys are again hashes, so any (trial, round,
//! vertex, particle) tuple maps to the same counter-based ChaCha stream no
//! matter how work is distributed over threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamKey {
    state: [u8; 32],
}

impl StreamKey {
    /// Root key for a master seed under a textual domain label.
    pub fn root(master_seed: u64, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"gwrg.v1");
        h.update(master_seed.to_le_bytes());
        h.update([0x00]);
        h.update(label.as_bytes());
        Self { state: h.finalize().into() }
    }

    /// Child key at an integer index.
    pub fn child(&self, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.state);
        h.update([0x01]);
        h.update(index.to_le_bytes());
        Self { state: h.finalize().into() }
    }

    /// Child key at a textual tag, for domain separation between siblings.
    pub fn child_tag(&self, tag: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.state);
        h.update([0x02]);
        h.update(tag.as_bytes());
        Self { state: h.finalize().into() }
    }

    /// Descend through a path of indices.
    pub fn descend(&self, path: &[u64]) -> Self {
        path.iter().fold(self.clone(), |k, &i| k.child(i))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.state)
    }

    /// Stable 128-bit digest of the key, for seed columns in result files.
    pub fn seed128(&self) -> u128 {
        u128::from_le_bytes(self.state[..16].try_into().unwrap())
    }
}
