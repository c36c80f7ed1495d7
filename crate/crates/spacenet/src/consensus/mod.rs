//! Consensus core: roles, election, DA layer, transcripts, blocks, and the
//! exception protocol.
//!
//! The chain advances in epochs. A FIFO queue of pre-elected leaders (seeded
//! by VDF output and the triggering block hash) isolates election from
//! packing; the queue head packs `N_ε` blocks per epoch, embeds the weight
//! update ΔS in the last one, and publishes proof transcripts to the DA
//! layer. Validators re-verify everything and raise typed exceptions; a
//! strict two-thirds skip vote slashes and replaces a failed leader.

pub mod chain;
pub mod da;
pub mod election;
pub mod engine;
pub mod transcript;
pub mod vdf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{pack_blocks, sign_tx, verify_tx, Block, Mempool, Tx, TxKind};
pub use da::{DaError, DaPayload, DaRecord, DaStore};
pub use election::{elect_leader, refill_queue, ElectionWeights, LeaderQueue};
pub use engine::{
    handle_exception, leader_epoch, skip_threshold_met, validator_epoch, weight_deltas,
    EpochProposal, ExceptionReason, Fallback, ProofContext, SkipOutcome, VoteArrival, WeightDelta,
};
pub use transcript::{prove, verify_transcript, ComputeFnId, ProofTranscript};
pub use vdf::{vdf_eval, vdf_verify};

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("election error: {0}")]
    Election(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Staked verifying node. `weight_pos` tracks stake and both shrink on a
/// slash; the proof weights accumulate delegated ΔS components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidatorState {
    pub node_id: String,
    pub stake: f64,
    pub weight_pos: f64,
    pub weight_pod: f64,
    pub weight_pof: f64,
    pub slashed: f64,
    pub online: bool,
}

impl ValidatorState {
    pub fn new(node_id: &str, stake: f64) -> Self {
        Self {
            node_id: node_id.to_string(),
            stake,
            weight_pos: stake,
            weight_pod: 0.0,
            weight_pof: 0.0,
            slashed: 0.0,
            online: true,
        }
    }
}

/// Epoch-level consensus parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochConfig {
    /// N_ε: blocks each leader packs per epoch.
    pub n_epoch_blocks: u64,
    /// N_Q: leader queue capacity.
    pub queue_size: usize,
    /// L_Gas.
    pub gas_limit: u64,
    /// L_R: logical-tick deadline for skip votes.
    pub skip_timer_limit: u64,
    /// Measurement windows ε_m per epoch ε.
    pub windows_per_epoch: u64,
    pub vdf_difficulty: u64,
    /// Proofs landing later than this many blocks raise an exception.
    pub proof_deadline_blocks: u64,
}

impl Default for EpochConfig {
    fn default() -> Self {
        Self {
            n_epoch_blocks: 4,
            queue_size: 4,
            gas_limit: 1_000,
            skip_timer_limit: 8,
            windows_per_epoch: 1,
            vdf_difficulty: 64,
            proof_deadline_blocks: 10,
        }
    }
}

impl EpochConfig {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        for (name, v) in [
            ("n_epoch_blocks", self.n_epoch_blocks),
            ("gas_limit", self.gas_limit),
            ("skip_timer_limit", self.skip_timer_limit),
            ("windows_per_epoch", self.windows_per_epoch),
            ("proof_deadline_blocks", self.proof_deadline_blocks),
        ] {
            if v == 0 {
                return Err(ConsensusError::Config(format!("{name} must be positive")));
            }
        }
        if self.queue_size == 0 {
            return Err(ConsensusError::Config("queue_size must be positive".into()));
        }
        Ok(())
    }
}

/// ΔS and related reward/penalty coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RewardCoeffs {
    pub r_pod: f64,
    pub r_pof: f64,
    pub p_fraud: f64,
    /// Valid fraction needed before a transmitter's service counts as
    /// corroborated.
    pub corroboration_quorum: f64,
    /// Stake fraction slashed from a skipped leader.
    pub slash_fraction: f64,
}

impl Default for RewardCoeffs {
    fn default() -> Self {
        Self {
            r_pod: 1.0,
            r_pof: 1.0,
            p_fraud: 2.0,
            corroboration_quorum: 0.5,
            slash_fraction: 0.1,
        }
    }
}
