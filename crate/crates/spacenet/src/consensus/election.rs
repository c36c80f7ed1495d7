//! Weighted leader election and the FIFO leader queue.
//!
//! Election is deterministic: the VDF output and the triggering block hash
//! select a point on the cumulative-weight line over validators sorted by
//! node id, so every replica elects the same leader from the same chain.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::crypto::{sha256_parts, Hash32};

use super::vdf::vdf_eval;
use super::{ConsensusError, ValidatorState};

/// Coefficients combining stake and proof weights into election weight
/// `W = w_stake·weight_pos + w_pod·weight_pod + w_pof·weight_pof`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ElectionWeights {
    pub w_stake: f64,
    pub w_pod: f64,
    pub w_pof: f64,
}

impl Default for ElectionWeights {
    fn default() -> Self {
        Self {
            w_stake: 1.0,
            w_pod: 0.5,
            w_pof: 0.5,
        }
    }
}

pub fn election_weight(v: &ValidatorState, w: &ElectionWeights) -> f64 {
    (w.w_stake * v.weight_pos + w.w_pod * v.weight_pod + w.w_pof * v.weight_pof).max(0.0)
}

/// Fixed-point micro-units so the cumulative walk is exact and portable.
fn weight_units(w: f64) -> u128 {
    (w * 1e6).round().max(0.0) as u128
}

/// Elect one leader by weighted sampling over the validator set.
///
/// Validators are walked in node-id order; the selector is the election
/// hash reduced modulo total weight, a tie-free deterministic rule.
pub fn elect_leader(
    validators: &BTreeMap<String, ValidatorState>,
    weights: &ElectionWeights,
    vdf_output: &Hash32,
    block_hash: &Hash32,
) -> Result<String, ConsensusError> {
    let mut total: u128 = 0;
    let mut cumulative: Vec<(&String, u128)> = Vec::with_capacity(validators.len());
    for (id, v) in validators {
        let units = weight_units(election_weight(v, weights));
        if units == 0 {
            continue;
        }
        total += units;
        cumulative.push((id, total));
    }
    if total == 0 {
        return Err(ConsensusError::Election(
            "all election weights are zero".into(),
        ));
    }
    let h = sha256_parts(&[b"elect", vdf_output, block_hash]);
    let r = u128::from_be_bytes(h[..16].try_into().expect("16 bytes")) % total;
    let winner = cumulative
        .iter()
        .find(|(_, cum)| r < *cum)
        .expect("r < total");
    Ok(winner.0.clone())
}

/// FIFO queue of pre-elected leaders; the head is the active leader.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LeaderQueue {
    entries: VecDeque<(u64, String)>,
    capacity: usize,
    next_epoch: u64,
}

impl LeaderQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            entries: VecDeque::new(),
            capacity,
            next_epoch: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Option<&(u64, String)> {
        self.entries.front()
    }

    pub fn entries(&self) -> impl Iterator<Item = &(u64, String)> {
        self.entries.iter()
    }

    /// Remove the consumed (or skipped) head.
    pub fn pop_head(&mut self) -> Option<(u64, String)> {
        self.entries.pop_front()
    }
}

/// Top the queue back up to capacity, electing each new entry from the hash
/// of the block that triggered the refill mixed with the entry's epoch
/// index (so one refill yields independent draws).
pub fn refill_queue(
    queue: &mut LeaderQueue,
    validators: &BTreeMap<String, ValidatorState>,
    weights: &ElectionWeights,
    trigger_hash: &Hash32,
    vdf_difficulty: u64,
) -> Result<(), ConsensusError> {
    while queue.entries.len() < queue.capacity {
        let epoch = queue.next_epoch;
        let seed = sha256_parts(&[b"queue-seed", trigger_hash, &epoch.to_le_bytes()]);
        let vdf_out = vdf_eval(&seed, vdf_difficulty);
        let leader = elect_leader(validators, weights, &vdf_out, trigger_hash)?;
        queue.entries.push_back((epoch, leader));
        queue.next_epoch += 1;
    }
    Ok(())
}
