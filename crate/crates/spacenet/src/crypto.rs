//! Hashing, keyed-MAC node identities, and hex helpers shared by the proof
//! engines.
//!
//! Every protocol "signature" in this simulator is a deterministic keyed MAC
//! over SHA-256, looked up through a [`KeyRing`]. The scheme is a stand-in:
//! downstream code treats signatures as opaque 32-byte tags, so a real
//! signature scheme can replace it behind the same ring interface.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

/// 32-byte digest used for hashes, signatures, keys, and commitments.
pub type Hash32 = [u8; 32];

/// SHA-256 of a single byte string.
pub fn sha256(data: &[u8]) -> Hash32 {
    let mut h = Sha256::new();
    h.update(data);
    h.finalize().into()
}

/// SHA-256 over the concatenation of `parts`, with each part length-prefixed
/// so distinct splits never collide.
pub fn sha256_parts(parts: &[&[u8]]) -> Hash32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Keyed MAC with a domain label separating unrelated uses of the same key.
pub fn mac(key: &Hash32, domain: &str, msg: &[u8]) -> Hash32 {
    sha256_parts(&[b"spacenet-mac", domain.as_bytes(), key, msg])
}

pub fn to_hex(h: &Hash32) -> String {
    hex::encode(h)
}

pub fn from_hex(s: &str) -> Option<Hash32> {
    let v = hex::decode(s).ok()?;
    v.try_into().ok()
}

/// Registry of node identity keys.
///
/// In the simulator the ring is shared by all parties, which makes
/// "signatures" verifiable MACs rather than asymmetric signatures; protocol
/// logic, not cryptographic strength, is what the tests exercise.
#[derive(Clone, Debug, Default)]
pub struct KeyRing {
    keys: BTreeMap<String, Hash32>,
}

impl KeyRing {
    pub fn new() -> Self {
        Self::default()
    }

    /// Derive and register a key for `node` from a 32-byte seed.
    pub fn register(&mut self, node: &str, seed: Hash32) {
        let key = sha256_parts(&[b"node-key", node.as_bytes(), &seed]);
        self.keys.insert(node.to_string(), key);
    }

    pub fn contains(&self, node: &str) -> bool {
        self.keys.contains_key(node)
    }

    /// MAC-sign `msg` as `node`. Returns `None` for unregistered nodes.
    pub fn sign(&self, node: &str, domain: &str, msg: &[u8]) -> Option<Hash32> {
        self.keys.get(node).map(|k| mac(k, domain, msg))
    }

    /// Check a tag allegedly produced by `node` over `msg`.
    pub fn verify(&self, node: &str, domain: &str, msg: &[u8], tag: &Hash32) -> bool {
        match self.keys.get(node) {
            Some(k) => &mac(k, domain, msg) == tag,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_are_length_prefixed() {
        assert_ne!(sha256_parts(&[b"ab", b"c"]), sha256_parts(&[b"a", b"bc"]));
    }

    #[test]
    fn ring_sign_verify_roundtrip() {
        let mut ring = KeyRing::new();
        ring.register("t0", [7u8; 32]);
        ring.register("c0", [9u8; 32]);
        let tag = ring.sign("t0", "pof-root", b"hello").unwrap();
        assert!(ring.verify("t0", "pof-root", b"hello", &tag));
        // wrong node, wrong domain, wrong message all fail
        assert!(!ring.verify("c0", "pof-root", b"hello", &tag));
        assert!(!ring.verify("t0", "pof-counter", b"hello", &tag));
        assert!(!ring.verify("t0", "pof-root", b"hellp", &tag));
        assert!(ring.sign("nobody", "x", b"y").is_none());
    }
}
