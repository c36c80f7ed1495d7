//! Proof of Flow: windowed Merkle attestation of delivered traffic.
//!
//! Per measurement window the transmitter and the challenger each build a
//! Merkle tree over the window's packets (failures as ∅ leaves), run the
//! triple-signature two-handshake, and the surviving attestation is held
//! back by the delayed-commit scheduler before it may reach the DA layer.
//! Acceptance finally requires the window's error share to be consistent
//! with the distribution proof's estimate of the link.

pub mod attest;
pub mod merkle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Hash32;

pub use attest::{
    two_handshake, verify_chain, verify_flow, CommitScheduler, FlowCheckConfig, FlowRejection,
    FlowVerdict,
};
pub use merkle::{build_merkle, diff_merkle, empty_leaf, MerkleTree};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("tree shape mismatch: {left} vs {right} leaves")]
    ShapeMismatch { left: usize, right: usize },
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("unregistered signer {0}")]
    UnknownSigner(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketStatus {
    Delivered,
    Failed,
}

/// One packet slot in a window. Failed slots keep their sequence number and
/// render as the ∅ placeholder leaf.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Packet {
    pub seq: u64,
    pub payload_hash: Hash32,
    pub payload_len: u32,
    pub status: PacketStatus,
}

/// A window of packets as one party saw it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowWindow {
    pub window_index: u64,
    pub transmitter_id: String,
    pub challenger_id: String,
    pub packets: Vec<Packet>,
}

impl FlowWindow {
    /// β: bytes actually delivered within the window.
    pub fn byte_count(&self) -> u64 {
        self.packets
            .iter()
            .filter(|p| p.status == PacketStatus::Delivered)
            .map(|p| p.payload_len as u64)
            .sum()
    }

    pub fn failed_count(&self) -> u32 {
        self.packets
            .iter()
            .filter(|p| p.status == PacketStatus::Failed)
            .count() as u32
    }
}

/// The triple-signed window attestation that may be committed to the DA
/// layer once its delay expires.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttestedFlow {
    pub transmitter_id: String,
    pub challenger_id: String,
    pub window_index: u64,
    pub root: Hash32,
    /// `[sig_T1, sig_C, sig_T2]`: over the bound root, then each over the
    /// previous element.
    pub sig_chain: [Hash32; 3],
    pub byte_count: u64,
    pub leaf_count: u32,
    pub failed_count: u32,
    /// Window at which the delayed commit released it; `None` while queued.
    pub committed_at: Option<u64>,
}
