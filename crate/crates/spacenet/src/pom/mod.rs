//! Proof of Mesh: multi-party shared-key derivation and the join handshake.
//!
//! The multikey-FHE agreement of the real protocol is modelled, not
//! implemented: shares travel under an authenticated randomized encryption
//! to each recipient and the shared key is a KDF of the canonical digest of
//! all plaintext shares. This preserves the message flow and the
//! Diffie-Hellman-like agreement property — every honest party derives the
//! same `K`, and `K` depends on every party's share — while staying honest
//! about cryptographic strength. The backend is swappable via
//! [`KeyAgreementBackend`].

pub mod handshake;

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{sha256_parts, to_hex, Hash32};
use crate::seed::SeedTree;

pub use handshake::{
    announce_mesh, mesh_handshake, verify_mesh_proof, AnnounceOutcome, CounterpartBehavior,
    HandshakeConfig, MeshProof,
};

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("authenticated decryption failed: {0}")]
    DecryptFailed(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("handshake rejected: {0}")]
    HandshakeRejected(String),
    #[error("handshake timed out after {retries} retries")]
    Timeout { retries: u32 },
}

/// One party's key material and noise share.
///
/// `secret_key` and `noise_e` never enter any transcript; the secrecy suite
/// scans for them byte-wise.
#[derive(Clone, Debug)]
pub struct KeyShare {
    pub party_id: String,
    pub public_key: Hash32,
    pub secret_key: Hash32,
    pub noise_e: Hash32,
}

/// Randomized authenticated encryption of a share to one recipient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ciphertext {
    pub recipient_fingerprint: Hash32,
    pub nonce: [u8; 16],
    pub body: Hash32,
    pub tag: Hash32,
}

/// The swappable key-agreement backend; [`HashBackend`] is the simulated
/// share-combining stand-in, a real FHE backend would slot in here.
pub trait KeyAgreementBackend {
    fn keygen(&self, party_id: &str, rng: &mut ChaCha8Rng) -> KeyShare;
    fn encrypt(&self, e: &Hash32, recipient_pk: &Hash32, rng: &mut ChaCha8Rng) -> Ciphertext;
    fn decrypt(&self, ct: &Ciphertext, sk: &Hash32) -> Result<Hash32, MeshError>;
    fn combine(&self, shares: &[Hash32]) -> Result<Hash32, MeshError>;
    fn derive_key(&self, digest: &Hash32, sk: &Hash32) -> Hash32;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HashBackend;

fn pk_of(sk: &Hash32) -> Hash32 {
    sha256_parts(&[b"pom-pk", sk])
}

fn keystream(pk: &Hash32, nonce: &[u8; 16]) -> Hash32 {
    sha256_parts(&[b"pom-stream", pk, nonce])
}

impl KeyAgreementBackend for HashBackend {
    fn keygen(&self, party_id: &str, rng: &mut ChaCha8Rng) -> KeyShare {
        let mut secret_key = [0u8; 32];
        rng.fill(&mut secret_key);
        let mut noise_e = [0u8; 32];
        rng.fill(&mut noise_e);
        KeyShare {
            party_id: party_id.to_string(),
            public_key: pk_of(&secret_key),
            secret_key,
            noise_e,
        }
    }

    fn encrypt(&self, e: &Hash32, recipient_pk: &Hash32, rng: &mut ChaCha8Rng) -> Ciphertext {
        let mut nonce = [0u8; 16];
        rng.fill(&mut nonce);
        let stream = keystream(recipient_pk, &nonce);
        let mut body = [0u8; 32];
        for i in 0..32 {
            body[i] = e[i] ^ stream[i];
        }
        Ciphertext {
            recipient_fingerprint: sha256_parts(&[b"pom-fp", recipient_pk]),
            nonce,
            body,
            tag: sha256_parts(&[b"pom-tag", recipient_pk, &nonce, &body]),
        }
    }

    fn decrypt(&self, ct: &Ciphertext, sk: &Hash32) -> Result<Hash32, MeshError> {
        let pk = pk_of(sk);
        if sha256_parts(&[b"pom-fp", &pk]) != ct.recipient_fingerprint {
            return Err(MeshError::DecryptFailed("wrong secret key".into()));
        }
        if sha256_parts(&[b"pom-tag", &pk, &ct.nonce, &ct.body]) != ct.tag {
            return Err(MeshError::DecryptFailed("ciphertext tampered".into()));
        }
        let stream = keystream(&pk, &ct.nonce);
        let mut e = [0u8; 32];
        for i in 0..32 {
            e[i] = ct.body[i] ^ stream[i];
        }
        Ok(e)
    }

    /// Digest over the multiset of shares, canonicalized by byte order so
    /// every party computes the same value regardless of arrival order.
    fn combine(&self, shares: &[Hash32]) -> Result<Hash32, MeshError> {
        if shares.len() < 2 {
            return Err(MeshError::Protocol(format!(
                "need at least 2 shares, got {}",
                shares.len()
            )));
        }
        let mut sorted: Vec<&Hash32> = shares.iter().collect();
        sorted.sort();
        let mut parts: Vec<&[u8]> = vec![b"pom-digest"];
        let count = (shares.len() as u64).to_le_bytes();
        parts.push(&count);
        for s in &sorted {
            parts.push(&s[..]);
        }
        Ok(sha256_parts(&parts))
    }

    /// In the simulated backend every participant's `sk` opens the combined
    /// digest to the same key, so `K` is derived from the digest alone.
    fn derive_key(&self, digest: &Hash32, _sk: &Hash32) -> Hash32 {
        sha256_parts(&[b"pom-kdf", digest])
    }
}

pub fn keygen(party_id: &str, rng: &mut ChaCha8Rng) -> KeyShare {
    HashBackend.keygen(party_id, rng)
}

pub fn encrypt_share(e: &Hash32, recipient_pk: &Hash32, rng: &mut ChaCha8Rng) -> Ciphertext {
    HashBackend.encrypt(e, recipient_pk, rng)
}

pub fn decrypt_share(ct: &Ciphertext, sk: &Hash32) -> Result<Hash32, MeshError> {
    HashBackend.decrypt(ct, sk)
}

pub fn combine_digest(shares: &[Hash32]) -> Result<Hash32, MeshError> {
    HashBackend.combine(shares)
}

pub fn derive_key(digest: &Hash32, sk: &Hash32) -> Hash32 {
    HashBackend.derive_key(digest, sk)
}

/// One exchanged protocol message, as recorded for the secrecy suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub from: String,
    pub to: String,
    pub kind: String,
    pub payload_hex: String,
}

/// A completed share exchange: everything observable plus each party's
/// locally derived key.
#[derive(Clone, Debug)]
pub struct MeshSession {
    pub participants: Vec<String>,
    /// Ciphertexts in flight, keyed by (sender, recipient).
    pub ciphertexts: BTreeMap<(String, String), Ciphertext>,
    pub combined_digest: Hash32,
    /// Per-party derived key; agreement means all values are equal.
    pub shared_keys: BTreeMap<String, Hash32>,
    pub transcript: Vec<TranscriptEntry>,
}

impl MeshSession {
    pub fn session_key(&self) -> Hash32 {
        *self
            .shared_keys
            .values()
            .next()
            .expect("session has participants")
    }

    /// All transcript payload bytes, concatenated, for substring scans.
    pub fn transcript_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in &self.transcript {
            out.extend_from_slice(t.from.as_bytes());
            out.extend_from_slice(t.to.as_bytes());
            out.extend_from_slice(t.kind.as_bytes());
            out.extend_from_slice(&hex::decode(&t.payload_hex).expect("hex payload"));
        }
        out
    }
}

/// Run the full share exchange for the named parties (satellite,
/// constellation peers, ground station, ...): keygen, pairwise encrypted
/// share distribution, local digest combination, key derivation.
pub fn run_session(party_ids: &[&str], tree: &SeedTree) -> Result<MeshSession, MeshError> {
    run_session_with(&HashBackend, party_ids, tree)
}

pub fn run_session_with<B: KeyAgreementBackend>(
    backend: &B,
    party_ids: &[&str],
    tree: &SeedTree,
) -> Result<MeshSession, MeshError> {
    if party_ids.len() < 2 {
        return Err(MeshError::Protocol("need at least 2 participants".into()));
    }
    let session_tree = tree.derive("pom-session");
    let mut transcript = Vec::new();
    let mut shares: BTreeMap<String, KeyShare> = BTreeMap::new();
    for id in party_ids {
        let mut rng = session_tree.derive(id).derive("keygen").rng();
        let share = backend.keygen(id, &mut rng);
        transcript.push(TranscriptEntry {
            from: id.to_string(),
            to: "*".into(),
            kind: "pk".into(),
            payload_hex: to_hex(&share.public_key),
        });
        shares.insert(id.to_string(), share);
    }

    // Pairwise encrypted share distribution.
    let mut ciphertexts = BTreeMap::new();
    let mut received: BTreeMap<String, Vec<Hash32>> = BTreeMap::new();
    for sender in party_ids {
        let sender_share = shares[*sender].clone();
        let mut rng = session_tree.derive(sender).derive("encrypt").rng();
        for recipient in party_ids {
            if sender == recipient {
                continue;
            }
            let ct = backend.encrypt(
                &sender_share.noise_e,
                &shares[*recipient].public_key,
                &mut rng,
            );
            transcript.push(TranscriptEntry {
                from: sender.to_string(),
                to: recipient.to_string(),
                kind: "share-ct".into(),
                payload_hex: hex::encode(
                    serde_json::to_vec(&ct).expect("ciphertext serializes"),
                ),
            });
            let plain = backend.decrypt(&ct, &shares[*recipient].secret_key)?;
            received
                .entry(recipient.to_string())
                .or_default()
                .push(plain);
            ciphertexts.insert((sender.to_string(), recipient.to_string()), ct);
        }
    }

    // Every party combines all shares (its own plus the received ones) and
    // derives the key locally.
    let mut combined: Option<Hash32> = None;
    let mut shared_keys = BTreeMap::new();
    for id in party_ids {
        let mut all: Vec<Hash32> = received.remove(*id).unwrap_or_default();
        all.push(shares[*id].noise_e);
        let digest = backend.combine(&all)?;
        if let Some(prev) = combined {
            if prev != digest {
                return Err(MeshError::Protocol("digest disagreement".into()));
            }
        }
        combined = Some(digest);
        shared_keys.insert(
            id.to_string(),
            backend.derive_key(&digest, &shares[*id].secret_key),
        );
    }

    Ok(MeshSession {
        participants: party_ids.iter().map(|s| s.to_string()).collect(),
        ciphertexts,
        combined_digest: combined.expect("at least two parties"),
        shared_keys,
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn keygen_is_deterministic_and_distinct() {
        let a = keygen("s0", &mut rng(1));
        let b = keygen("s0", &mut rng(1));
        assert_eq!(a.noise_e, b.noise_e);
        assert_eq!(a.secret_key, b.secret_key);
        let c = keygen("s0", &mut rng(2));
        assert_ne!(a.noise_e, c.noise_e);
    }

    #[test]
    fn many_shares_all_distinct() {
        let mut r = rng(3);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..10_000 {
            let s = keygen("x", &mut r);
            assert!(seen.insert(s.noise_e), "noise collision");
        }
    }

    #[test]
    fn encrypt_decrypt_roundtrip() {
        let mut r = rng(5);
        let share = keygen("s0", &mut r);
        let e = [42u8; 32];
        let ct = encrypt_share(&e, &share.public_key, &mut r);
        assert_ne!(ct.body, e, "ciphertext must differ from plaintext");
        assert_eq!(decrypt_share(&ct, &share.secret_key).unwrap(), e);
    }

    #[test]
    fn wrong_key_and_tamper_fail_explicitly() {
        let mut r = rng(7);
        let alice = keygen("a", &mut r);
        let bob = keygen("b", &mut r);
        let ct = encrypt_share(&alice.noise_e, &alice.public_key, &mut r);
        assert!(matches!(
            decrypt_share(&ct, &bob.secret_key),
            Err(MeshError::DecryptFailed(_))
        ));
        let mut bad = ct.clone();
        bad.body[3] ^= 1;
        assert!(matches!(
            decrypt_share(&bad, &alice.secret_key),
            Err(MeshError::DecryptFailed(_))
        ));
    }

    #[test]
    fn encryption_is_randomized() {
        let mut r = rng(9);
        let share = keygen("s0", &mut r);
        let e = [7u8; 32];
        let c1 = encrypt_share(&e, &share.public_key, &mut r);
        let c2 = encrypt_share(&e, &share.public_key, &mut r);
        assert_ne!(c1.body, c2.body);
        assert_ne!(c1.nonce, c2.nonce);
    }

    #[test]
    fn digest_is_permutation_invariant() {
        let shares = [[1u8; 32], [2u8; 32], [3u8; 32]];
        let a = combine_digest(&shares).unwrap();
        let b = combine_digest(&[[3u8; 32], [1u8; 32], [2u8; 32]]).unwrap();
        assert_eq!(a, b);
        assert!(combine_digest(&[[1u8; 32]]).is_err());
    }

    #[test]
    fn digest_avalanche() {
        let mut r = rng(11);
        let mut total_frac = 0.0;
        let trials = 1000;
        for _ in 0..trials {
            let mut shares = [[0u8; 32]; 3];
            for s in &mut shares {
                r.fill(&mut s[..]);
            }
            let h1 = combine_digest(&shares).unwrap();
            let bit = (r.gen::<u16>() % 256) as usize;
            shares[(r.gen::<u8>() % 3) as usize][bit / 8] ^= 1 << (bit % 8);
            let h2 = combine_digest(&shares).unwrap();
            let hamming: u32 = h1
                .iter()
                .zip(&h2)
                .map(|(a, b)| (a ^ b).count_ones())
                .sum();
            total_frac += hamming as f64 / 256.0;
        }
        let mean = total_frac / trials as f64;
        assert!((0.4..=0.6).contains(&mean), "avalanche mean {mean}");
    }

    #[test]
    fn session_agreement_and_secrecy() {
        let tree = SeedTree::new(77);
        let parties = ["sat", "peer0", "peer1", "ground"];
        let sess = run_session(&parties, &tree).unwrap();
        let k = sess.session_key();
        for (_, key) in &sess.shared_keys {
            assert_eq!(*key, k);
        }
        let bytes = sess.transcript_bytes();
        let contains = |needle: &[u8]| bytes.windows(needle.len()).any(|w| w == needle);
        assert!(!contains(&k), "derived key leaked into transcript");
        // re-derive each party's secrets deterministically and scan
        for id in &parties {
            let mut r = tree.derive("pom-session").derive(id).derive("keygen").rng();
            let share = keygen(id, &mut r);
            assert!(!contains(&share.secret_key), "{id} sk leaked");
            assert!(!contains(&share.noise_e), "{id} noise leaked");
        }
    }

    #[test]
    fn ten_party_session_agrees() {
        let tree = SeedTree::new(5);
        let ids: Vec<String> = (0..10).map(|i| format!("node{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let sess = run_session(&refs, &tree).unwrap();
        let k = sess.session_key();
        assert!(sess.shared_keys.values().all(|v| *v == k));
    }

    #[test]
    fn single_party_session_rejected() {
        let tree = SeedTree::new(1);
        assert!(run_session(&["solo"], &tree).is_err());
    }
}
