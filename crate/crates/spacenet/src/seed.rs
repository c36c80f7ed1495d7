//! Deterministic seed derivation.
//!
//! Every randomness consumer draws from its own labelled stream derived from
//! the scenario seed. Streams are independent by construction, so adding a
//! new consumer (or reordering calls) never perturbs an existing stream —
//! the property the end-to-end determinism suite relies on.
//!
//! Derivation: the root state is `H("seed-root" ‖ seed_le)`; each child label
//! appends `H(parent ‖ label)`. Leaf streams are ChaCha8 keyed by the node
//! state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::{sha256_parts, Hash32};

#[derive(Clone, Debug)]
pub struct SeedTree {
    state: Hash32,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self {
            state: sha256_parts(&[b"seed-root", &seed.to_le_bytes()]),
        }
    }

    /// Child subtree for a labelled subsystem or entity.
    pub fn derive(&self, label: &str) -> SeedTree {
        SeedTree {
            state: sha256_parts(&[&self.state, label.as_bytes()]),
        }
    }

    /// Child subtree for an indexed entity (receiver, epoch, window, ...).
    pub fn derive_idx(&self, label: &str, idx: u64) -> SeedTree {
        SeedTree {
            state: sha256_parts(&[&self.state, label.as_bytes(), &idx.to_le_bytes()]),
        }
    }

    pub fn seed_bytes(&self) -> Hash32 {
        self.state
    }

    /// Leaf RNG stream for this node.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.state)
    }
}
