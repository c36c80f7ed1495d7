//! SYN / SYN-ACK / keyed-ACK handshake and the on-ledger mesh announcement.
//!
//! The handshake runs on a logical clock: a silent counterpart burns one
//! timeout per attempt until the retry budget is spent. The ACK tag binds
//! the session key to the current block hash, so replays under a different
//! block fail verification.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::consensus::da::{DaPayload, DaStore};
use crate::crypto::{mac, to_hex, Hash32};

use super::{MeshError, TranscriptEntry};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HandshakeConfig {
    /// Logical ticks before an unanswered SYN counts as timed out.
    pub timeout_ticks: u64,
    pub max_retries: u32,
}

impl Default for HandshakeConfig {
    fn default() -> Self {
        Self {
            timeout_ticks: 4,
            max_retries: 2,
        }
    }
}

/// Counterpart fault model for a handshake run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CounterpartBehavior {
    Responsive,
    /// Never answers; the handshake must exhaust its retries.
    Silent,
    /// Drops the first `n` SYNs, then answers.
    DropFirst(u32),
}

/// Proof that a satellite completed the keyed handshake for a block.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshProof {
    pub satellite_id: String,
    pub block_hash: Hash32,
    pub ack_tag: Hash32,
    pub verifier_votes: BTreeSet<String>,
}

fn ack_tag(key: &Hash32, block_hash: &Hash32) -> Hash32 {
    mac(key, "pom-ack", block_hash)
}

/// Check an ACK tag against a session key and the block hash it must bind.
pub fn verify_mesh_proof(proof: &MeshProof, key: &Hash32, expected_block: &Hash32) -> bool {
    proof.block_hash == *expected_block && proof.ack_tag == ack_tag(key, &proof.block_hash)
}

/// Run the three-message exchange between the satellite and one counterpart.
///
/// `sat_key` and `counterpart_key` are each side's locally derived session
/// key; agreement failures therefore surface as an ACK rejection, exactly
/// like a forged tag would.
pub fn mesh_handshake(
    satellite_id: &str,
    counterpart_id: &str,
    sat_key: &Hash32,
    counterpart_key: &Hash32,
    block_hash: &Hash32,
    cfg: &HandshakeConfig,
    behavior: CounterpartBehavior,
) -> Result<(MeshProof, Vec<TranscriptEntry>), MeshError> {
    let mut transcript = Vec::new();
    let mut clock: u64 = 0;
    for attempt in 0..=cfg.max_retries {
        clock += 1;
        transcript.push(TranscriptEntry {
            from: satellite_id.into(),
            to: counterpart_id.into(),
            kind: format!("SYN@{clock}"),
            payload_hex: String::new(),
        });
        let answers = match behavior {
            CounterpartBehavior::Responsive => true,
            CounterpartBehavior::Silent => false,
            CounterpartBehavior::DropFirst(n) => attempt >= n,
        };
        if !answers {
            clock += cfg.timeout_ticks;
            continue;
        }
        clock += 1;
        transcript.push(TranscriptEntry {
            from: counterpart_id.into(),
            to: satellite_id.into(),
            kind: format!("SYN-ACK@{clock}"),
            payload_hex: String::new(),
        });
        let tag = ack_tag(sat_key, block_hash);
        clock += 1;
        transcript.push(TranscriptEntry {
            from: satellite_id.into(),
            to: counterpart_id.into(),
            kind: format!("ACK@{clock}"),
            payload_hex: to_hex(&tag),
        });
        if tag != ack_tag(counterpart_key, block_hash) {
            return Err(MeshError::HandshakeRejected(
                "ACK tag does not verify under the counterpart's key".into(),
            ));
        }
        let mut votes = BTreeSet::new();
        votes.insert(counterpart_id.to_string());
        return Ok((
            MeshProof {
                satellite_id: satellite_id.to_string(),
                block_hash: *block_hash,
                ack_tag: tag,
                verifier_votes: votes,
            },
            transcript,
        ));
    }
    Err(MeshError::Timeout {
        retries: cfg.max_retries,
    })
}

/// Outcome of publishing a mesh proof to the DA layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnnounceOutcome {
    Recorded { offset: u64 },
    /// Already on the ledger; announcement is idempotent.
    AlreadyRecorded,
    /// Not enough verifier votes yet.
    Pending { votes: usize, quorum: usize },
}

/// Publish a verified mesh proof as an on-ledger record.
///
/// Unverifiable proofs never reach the store; under-quorum proofs stay
/// pending; duplicates collapse onto the existing record.
pub fn announce_mesh(
    proof: &MeshProof,
    session_key: &Hash32,
    quorum: usize,
    epoch: u64,
    da: &mut DaStore,
) -> Result<AnnounceOutcome, MeshError> {
    if !verify_mesh_proof(proof, session_key, &proof.block_hash) {
        return Err(MeshError::HandshakeRejected(
            "announcement carries an unverified proof".into(),
        ));
    }
    if proof.verifier_votes.len() < quorum {
        return Ok(AnnounceOutcome::Pending {
            votes: proof.verifier_votes.len(),
            quorum,
        });
    }
    let block_hex = to_hex(&proof.block_hash);
    let duplicate = da
        .iter()
        .any(|r| matches!(&r.payload, DaPayload::Mesh { satellite, block_hash, .. }
            if *satellite == proof.satellite_id && *block_hash == block_hex));
    if duplicate {
        return Ok(AnnounceOutcome::AlreadyRecorded);
    }
    let offset = da.append(DaPayload::Mesh {
        satellite: proof.satellite_id.clone(),
        block_hash: block_hex,
        epoch,
    });
    Ok(AnnounceOutcome::Recorded { offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256;

    fn key(n: u8) -> Hash32 {
        sha256(&[n])
    }

    #[test]
    fn honest_pair_verifies() {
        let k = key(1);
        let bh = sha256(b"block-9");
        let (proof, transcript) = mesh_handshake(
            "sat",
            "ground",
            &k,
            &k,
            &bh,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap();
        assert!(verify_mesh_proof(&proof, &k, &bh));
        assert_eq!(transcript.len(), 3); // SYN, SYN-ACK, ACK
    }

    #[test]
    fn wrong_block_hash_rejected() {
        let k = key(1);
        let bh = sha256(b"block-9");
        let (proof, _) = mesh_handshake(
            "sat",
            "ground",
            &k,
            &k,
            &bh,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap();
        assert!(!verify_mesh_proof(&proof, &k, &sha256(b"block-10")));
    }

    #[test]
    fn replayed_ack_under_new_block_rejected() {
        let k = key(1);
        let old_block = sha256(b"epoch-4");
        let new_block = sha256(b"epoch-5");
        let (old_proof, _) = mesh_handshake(
            "sat",
            "ground",
            &k,
            &k,
            &old_block,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap();
        // adversary replays the old tag claiming it binds the new block
        let replay = MeshProof {
            block_hash: new_block,
            ..old_proof
        };
        assert!(!verify_mesh_proof(&replay, &k, &new_block));
    }

    #[test]
    fn key_disagreement_rejected() {
        let bh = sha256(b"b");
        let err = mesh_handshake(
            "sat",
            "ground",
            &key(1),
            &key(2),
            &bh,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::HandshakeRejected(_)));
    }

    #[test]
    fn silent_counterpart_times_out_then_retry_succeeds() {
        let k = key(3);
        let bh = sha256(b"b");
        let cfg = HandshakeConfig {
            timeout_ticks: 4,
            max_retries: 2,
        };
        let err =
            mesh_handshake("sat", "g", &k, &k, &bh, &cfg, CounterpartBehavior::Silent).unwrap_err();
        assert_eq!(err, MeshError::Timeout { retries: 2 });
        let (proof, transcript) =
            mesh_handshake("sat", "g", &k, &k, &bh, &cfg, CounterpartBehavior::DropFirst(2))
                .unwrap();
        assert!(verify_mesh_proof(&proof, &k, &bh));
        // two dropped SYNs plus the successful three-message exchange
        assert_eq!(transcript.len(), 5);
    }

    #[test]
    fn announce_records_once_and_is_idempotent() {
        let k = key(4);
        let bh = sha256(b"b");
        let (proof, _) = mesh_handshake(
            "sat",
            "g",
            &k,
            &k,
            &bh,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap();
        let mut da = DaStore::new();
        let out = announce_mesh(&proof, &k, 1, 3, &mut da).unwrap();
        assert!(matches!(out, AnnounceOutcome::Recorded { offset: 0 }));
        let out = announce_mesh(&proof, &k, 1, 3, &mut da).unwrap();
        assert_eq!(out, AnnounceOutcome::AlreadyRecorded);
        assert_eq!(da.len(), 1);
    }

    #[test]
    fn announce_below_quorum_pending() {
        let k = key(5);
        let bh = sha256(b"b");
        let (proof, _) = mesh_handshake(
            "sat",
            "g",
            &k,
            &k,
            &bh,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap();
        let mut da = DaStore::new();
        match announce_mesh(&proof, &k, 3, 0, &mut da).unwrap() {
            AnnounceOutcome::Pending { votes, quorum } => {
                assert_eq!((votes, quorum), (1, 3));
            }
            other => panic!("expected pending, got {other:?}"),
        }
        assert_eq!(da.len(), 0);
    }

    #[test]
    fn announce_rejects_unverified_proof() {
        let k = key(6);
        let bh = sha256(b"b");
        let (mut proof, _) = mesh_handshake(
            "sat",
            "g",
            &k,
            &k,
            &bh,
            &HandshakeConfig::default(),
            CounterpartBehavior::Responsive,
        )
        .unwrap();
        proof.ack_tag[0] ^= 1;
        let mut da = DaStore::new();
        assert!(announce_mesh(&proof, &k, 1, 0, &mut da).is_err());
        assert_eq!(da.len(), 0);
    }
}
