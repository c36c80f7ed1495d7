//! Append-only data-availability log.
//!
//! Challengers publish α submissions and flow attestations here; leaders
//! publish proof transcripts; mesh announcements land here too. Records are
//! totally ordered, offsets are stable across replay, and the on-disk form
//! is newline-delimited JSON with a `type` discriminant and a schema
//! version `v`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pod::{PodReport, PodState};
use crate::pof::AttestedFlow;
use crate::signal::{AlphaMap, Position};

use super::transcript::ProofTranscript;

pub const DA_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DaError {
    #[error("corrupted DA record at offset {offset}: {msg}")]
    Corrupted { offset: u64, msg: String },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DaPayload {
    /// One challenger's state-parameter submission for an epoch window.
    Alpha {
        transmitter: String,
        receiver: String,
        epoch: u64,
        position: Position,
        alpha: AlphaMap,
    },
    /// A committed, triple-signed flow window.
    Flow {
        transmitter: String,
        challenger: String,
        window: u64,
        root: String,
        sigs: [String; 3],
        bytes: u64,
        leaves: u32,
        failed: u32,
        committed_at: u64,
    },
    /// Successful mesh join announcement.
    Mesh {
        satellite: String,
        block_hash: String,
        epoch: u64,
    },
    /// Leader-published distribution estimate for one transmitter epoch.
    PodReport { report: PodReport },
    /// Warm-start state snapshot backing transcript replay.
    PodState {
        transmitter: String,
        epoch: u64,
        state: PodState,
    },
    /// Mock zk transcript π and the chain height it was published at.
    Proof {
        transcript: ProofTranscript,
        published_at_height: u64,
    },
}

impl DaPayload {
    pub fn from_attested_flow(a: &AttestedFlow) -> Self {
        DaPayload::Flow {
            transmitter: a.transmitter_id.clone(),
            challenger: a.challenger_id.clone(),
            window: a.window_index,
            root: crate::crypto::to_hex(&a.root),
            sigs: [
                crate::crypto::to_hex(&a.sig_chain[0]),
                crate::crypto::to_hex(&a.sig_chain[1]),
                crate::crypto::to_hex(&a.sig_chain[2]),
            ],
            bytes: a.byte_count,
            leaves: a.leaf_count,
            failed: a.failed_count,
            committed_at: a.committed_at.unwrap_or(0),
        }
    }

    pub fn to_attested_flow(&self) -> Option<AttestedFlow> {
        let DaPayload::Flow {
            transmitter,
            challenger,
            window,
            root,
            sigs,
            bytes,
            leaves,
            failed,
            committed_at,
        } = self
        else {
            return None;
        };
        Some(AttestedFlow {
            transmitter_id: transmitter.clone(),
            challenger_id: challenger.clone(),
            window_index: *window,
            root: crate::crypto::from_hex(root)?,
            sig_chain: [
                crate::crypto::from_hex(&sigs[0])?,
                crate::crypto::from_hex(&sigs[1])?,
                crate::crypto::from_hex(&sigs[2])?,
            ],
            byte_count: *bytes,
            leaf_count: *leaves,
            failed_count: *failed,
            committed_at: Some(*committed_at),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DaRecord {
    pub v: u32,
    pub offset: u64,
    #[serde(flatten)]
    pub payload: DaPayload,
}

#[derive(Clone, Debug, Default)]
pub struct DaStore {
    records: Vec<DaRecord>,
}

impl DaStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, payload: DaPayload) -> u64 {
        let offset = self.records.len() as u64;
        self.records.push(DaRecord {
            v: DA_SCHEMA_VERSION,
            offset,
            payload,
        });
        offset
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, offset: u64) -> Option<&DaRecord> {
        self.records.get(offset as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DaRecord> {
        self.records.iter()
    }

    /// Read-only filtered fetch.
    pub fn fetch<F>(&self, mut pred: F) -> Vec<&DaRecord>
    where
        F: FnMut(&DaPayload) -> bool,
    {
        self.records
            .iter()
            .filter(|r| pred(&r.payload))
            .collect()
    }

    /// Alpha submissions for one transmitter epoch, ordered by offset.
    pub fn alpha_records(&self, transmitter: &str, epoch: u64) -> Vec<&DaRecord> {
        self.fetch(|p| {
            matches!(p, DaPayload::Alpha { transmitter: t, epoch: e, .. }
                if t == transmitter && *e == epoch)
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("DA records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, DaError> {
        let mut records = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let offset = i as u64;
            let rec: DaRecord = serde_json::from_str(line).map_err(|e| DaError::Corrupted {
                offset,
                msg: e.to_string(),
            })?;
            if rec.v != DA_SCHEMA_VERSION {
                return Err(DaError::Corrupted {
                    offset,
                    msg: format!("unsupported schema version {}", rec.v),
                });
            }
            if rec.offset != offset {
                return Err(DaError::Corrupted {
                    offset,
                    msg: format!("offset field {} does not match position", rec.offset),
                });
            }
            records.push(rec);
        }
        Ok(Self { records })
    }
}
