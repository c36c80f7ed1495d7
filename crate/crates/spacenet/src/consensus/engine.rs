//! Leader and validator epoch workflows plus the leader-skip exception
//! protocol.
//!
//! The leader runs the distribution proof per transmitter, verifies the
//! epoch's committed flow attestations, publishes transcripts, derives the
//! weight update ΔS, and packs blocks. Validators re-derive everything from
//! the DA layer and raise typed exceptions on any mismatch; skipping a
//! leader requires votes strictly exceeding two thirds before the logical
//! timer expires.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::KeyRing;
use crate::pod::{pod_epoch, Classification, PodConfig, PodReport, PodSample, PodState};
use crate::pof::{verify_flow, AttestedFlow, FlowCheckConfig, FlowVerdict};

use super::chain::{pack_blocks, verify_block_sig, verify_tx, Block, Mempool};
use super::da::{DaPayload, DaStore};
use super::transcript::{
    output_commitment_hex, prove, verify_transcript, ComputeFnId, FlowReplayParams,
    PodReplayParams,
};
use super::{EpochConfig, RewardCoeffs, ValidatorState};

/// Per-participant weight update, split by originating proof.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightDelta {
    pub pod: f64,
    pub pof: f64,
}

impl WeightDelta {
    pub fn total(&self) -> f64 {
        self.pod + self.pof
    }
}

/// ΔS from verified proofs: participation reward for receivers in
/// consensus, byte-proportional flow reward, penalty for flagged
/// misreporting. Objectively impaired data is discarded, never penalized,
/// and a transmitter is never penalized through the distribution proof
/// alone — an uncorroborated claim simply earns nothing.
pub fn weight_deltas(
    reports: &BTreeMap<String, PodReport>,
    flows: &[(AttestedFlow, FlowVerdict)],
    rewards: &RewardCoeffs,
) -> BTreeMap<String, WeightDelta> {
    let mut out: BTreeMap<String, WeightDelta> = BTreeMap::new();
    for (transmitter, report) in reports {
        for (rx, rec) in &report.per_receiver {
            let entry = out.entry(rx.clone()).or_default();
            match rec.classification {
                Classification::Valid => entry.pod += rewards.r_pod,
                Classification::Anomalous => {
                    if !rec.is_objective_anomaly() {
                        entry.pod -= rewards.p_fraud;
                    }
                }
            }
        }
        if report.corroborates_service(rewards.corroboration_quorum) {
            out.entry(transmitter.clone()).or_default().pod += rewards.r_pod;
        }
    }
    let total_bytes: u64 = flows
        .iter()
        .filter(|(_, v)| v.is_ok())
        .map(|(a, _)| a.byte_count)
        .sum();
    if total_bytes > 0 {
        for (attested, verdict) in flows {
            if verdict.is_err() {
                continue;
            }
            let share = rewards.r_pof * attested.byte_count as f64 / total_bytes as f64;
            out.entry(attested.challenger_id.clone()).or_default().pof += share;
            out.entry(attested.transmitter_id.clone()).or_default().pof += share;
        }
    }
    out
}

/// Inputs the proof phase of an epoch needs.
#[derive(Clone, Debug)]
pub struct ProofContext {
    pub epoch: u64,
    pub transmitters: Vec<String>,
    pub pod_config: PodConfig,
    pub flow_check: FlowCheckConfig,
    pub rewards: RewardCoeffs,
    /// DA offsets of flow attestations whose delayed commit landed this
    /// epoch.
    pub flow_offsets: Vec<u64>,
}

/// Warm-start handle: the state itself plus its DA snapshot offset so the
/// next transcript can name it.
#[derive(Clone, Debug, Default)]
pub struct PodStateHandle {
    pub offset: Option<u64>,
    pub state: PodState,
}

#[derive(Clone, Debug)]
pub struct EpochProposal {
    pub epoch: u64,
    pub blocks: Vec<Block>,
    pub pod_reports: BTreeMap<String, PodReport>,
    pub pod_report_offsets: BTreeMap<String, u64>,
    pub transcript_offsets: Vec<u64>,
    pub flow_verdicts: Vec<(u64, FlowVerdict)>,
    pub delta_s: BTreeMap<String, WeightDelta>,
}

/// The leader's epoch: prove, store, weigh, pack, sign.
#[allow(clippy::too_many_arguments)]
pub fn leader_epoch(
    leader_id: &str,
    da: &mut DaStore,
    mempool: &mut Mempool,
    pod_states: &mut BTreeMap<String, PodStateHandle>,
    nonces: &mut BTreeMap<String, u64>,
    ring: &KeyRing,
    ctx: &ProofContext,
    cfg: &EpochConfig,
    parent_hash: &str,
    start_height: u64,
) -> EpochProposal {
    let mut pod_reports = BTreeMap::new();
    let mut pod_report_offsets = BTreeMap::new();
    let mut transcript_offsets = Vec::new();

    for transmitter in &ctx.transmitters {
        let alpha_recs = da.alpha_records(transmitter, ctx.epoch);
        let alpha_offsets: Vec<u64> = alpha_recs.iter().map(|r| r.offset).collect();
        let samples: Vec<PodSample> = alpha_recs
            .iter()
            .filter_map(|r| match &r.payload {
                DaPayload::Alpha {
                    receiver,
                    position,
                    alpha,
                    ..
                } => Some(PodSample {
                    receiver_id: receiver.clone(),
                    transmitter_id: transmitter.clone(),
                    position: *position,
                    time: ctx.epoch as f64,
                    alpha: alpha.clone(),
                }),
                _ => None,
            })
            .collect();
        let prev = pod_states.get(transmitter);
        let prev_state_offset = prev.and_then(|h| h.offset);
        let (report, new_state) = pod_epoch(
            &samples,
            prev.map(|h| &h.state),
            &ctx.pod_config,
        )
        .expect("validated config over one transmitter's samples");

        let report_json = serde_json::to_string(&report).expect("report serializes");
        let report_offset = da.append(DaPayload::PodReport {
            report: report.clone(),
        });
        let state_offset = da.append(DaPayload::PodState {
            transmitter: transmitter.clone(),
            epoch: ctx.epoch,
            state: new_state.clone(),
        });
        let params = serde_json::to_string(&PodReplayParams {
            transmitter: transmitter.clone(),
            epoch: ctx.epoch,
            config: ctx.pod_config.clone(),
            prev_state_offset,
        })
        .expect("params serialize");
        let mut da_inputs = alpha_offsets;
        if let Some(off) = prev_state_offset {
            da_inputs.push(off);
        }
        let pi = prove(
            &format!("pod/{transmitter}/{}", ctx.epoch),
            ComputeFnId::PodEpoch,
            da_inputs,
            params,
            &report_json,
            ctx.epoch,
            da,
        )
        .expect("inputs just appended");
        transcript_offsets.push(da.append(DaPayload::Proof {
            transcript: pi,
            published_at_height: start_height,
        }));

        pod_states.insert(
            transmitter.clone(),
            PodStateHandle {
                offset: Some(state_offset),
                state: new_state,
            },
        );
        pod_reports.insert(transmitter.clone(), report);
        pod_report_offsets.insert(transmitter.clone(), report_offset);
    }

    // Flow verification, one transcript per transmitter with traffic.
    let mut flow_verdicts: Vec<(u64, FlowVerdict)> = Vec::new();
    let mut flows_by_tx: BTreeMap<String, Vec<(u64, AttestedFlow)>> = BTreeMap::new();
    for off in &ctx.flow_offsets {
        let Some(rec) = da.get(*off) else { continue };
        let Some(attested) = rec.payload.to_attested_flow() else {
            continue;
        };
        flows_by_tx
            .entry(attested.transmitter_id.clone())
            .or_default()
            .push((*off, attested));
    }
    let mut flow_pairs: Vec<(AttestedFlow, FlowVerdict)> = Vec::new();
    for (transmitter, flows) in &flows_by_tx {
        let report = pod_reports.get(transmitter);
        let mut verdicts = Vec::new();
        for (off, attested) in flows {
            let v = verify_flow(attested, report, &ctx.flow_check, ring);
            verdicts.push((*off, v.clone()));
            flow_verdicts.push((*off, v.clone()));
            flow_pairs.push((attested.clone(), v));
        }
        if let Some(report_offset) = pod_report_offsets.get(transmitter) {
            let params = serde_json::to_string(&FlowReplayParams {
                check: ctx.flow_check.clone(),
                pod_report_offset: *report_offset,
            })
            .expect("params serialize");
            let mut da_inputs: Vec<u64> = flows.iter().map(|(off, _)| *off).collect();
            da_inputs.push(*report_offset);
            let output =
                serde_json::to_string(&verdicts).expect("verdicts serialize");
            let pi = prove(
                &format!("pof/{transmitter}/{}", ctx.epoch),
                ComputeFnId::FlowVerify,
                da_inputs,
                params,
                &output,
                ctx.epoch,
                da,
            )
            .expect("inputs exist");
            transcript_offsets.push(da.append(DaPayload::Proof {
                transcript: pi,
                published_at_height: start_height,
            }));
        }
    }

    let delta_s = weight_deltas(&pod_reports, &flow_pairs, &ctx.rewards);
    let blocks = pack_blocks(
        leader_id,
        parent_hash,
        start_height,
        cfg.n_epoch_blocks,
        cfg.gas_limit,
        delta_s.clone(),
        transcript_offsets.clone(),
        mempool,
        nonces,
        ring,
    );

    EpochProposal {
        epoch: ctx.epoch,
        blocks,
        pod_reports,
        pod_report_offsets,
        transcript_offsets,
        flow_verdicts,
        delta_s,
    }
}

/// Why a validator rejected an epoch.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionReason {
    /// No proposal by the deadline.
    Timeout,
    /// A transcript failed re-execution or commitment checks.
    BadProof,
    /// A proof landed past the deadline window.
    ProofLate,
    /// Wrong block count or broken height sequence.
    BadShape,
    BadParent,
    BadSignature,
    GasExceeded,
    BadTx,
    /// ΔS in the final block is not the deterministic function of the
    /// verified proofs.
    BadWeight,
}

/// Validator-side verification of one epoch proposal.
#[allow(clippy::too_many_arguments)]
pub fn validator_epoch(
    proposal: Option<&EpochProposal>,
    da: &DaStore,
    ring: &KeyRing,
    ctx: &ProofContext,
    cfg: &EpochConfig,
    parent_hash: &str,
    start_height: u64,
    nonces: &BTreeMap<String, u64>,
) -> Result<(), ExceptionReason> {
    let proposal = proposal.ok_or(ExceptionReason::Timeout)?;

    // π = Fetch(D_A); Verify(π)
    for off in &proposal.transcript_offsets {
        let Some(rec) = da.get(*off) else {
            return Err(ExceptionReason::BadProof);
        };
        let DaPayload::Proof {
            transcript,
            published_at_height,
        } = &rec.payload
        else {
            return Err(ExceptionReason::BadProof);
        };
        if *published_at_height > start_height + cfg.proof_deadline_blocks {
            return Err(ExceptionReason::ProofLate);
        }
        if !verify_transcript(transcript, da, ring) {
            return Err(ExceptionReason::BadProof);
        }
    }

    // Each published report must be the byte-exact output the distribution
    // transcript committed to.
    let mut reports: BTreeMap<String, PodReport> = BTreeMap::new();
    for (transmitter, report_offset) in &proposal.pod_report_offsets {
        let Some(rec) = da.get(*report_offset) else {
            return Err(ExceptionReason::BadProof);
        };
        let DaPayload::PodReport { report } = &rec.payload else {
            return Err(ExceptionReason::BadProof);
        };
        let json = serde_json::to_string(report).expect("report serializes");
        let bound = proposal.transcript_offsets.iter().any(|off| {
            matches!(da.get(*off).map(|r| &r.payload),
                Some(DaPayload::Proof { transcript, .. })
                    if transcript.compute_fn == ComputeFnId::PodEpoch
                        && transcript.output_commitment == output_commitment_hex(&json))
        });
        if !bound {
            return Err(ExceptionReason::BadProof);
        }
        reports.insert(transmitter.clone(), report.clone());
    }

    // Block shape, chaining, signatures, gas, and transactions.
    if proposal.blocks.len() as u64 != cfg.n_epoch_blocks {
        return Err(ExceptionReason::BadShape);
    }
    let mut parent = parent_hash.to_string();
    let mut expected_height = start_height;
    let mut nonce_view = nonces.clone();
    for (i, block) in proposal.blocks.iter().enumerate() {
        if block.height != expected_height {
            return Err(ExceptionReason::BadShape);
        }
        if block.parent_hash != parent {
            return Err(ExceptionReason::BadParent);
        }
        if !verify_block_sig(block, ring) {
            return Err(ExceptionReason::BadSignature);
        }
        if block.gas_total() > cfg.gas_limit {
            return Err(ExceptionReason::GasExceeded);
        }
        for tx in &block.txs {
            let expected = nonce_view.get(&tx.from).copied().unwrap_or(0);
            if verify_tx(tx, ring, expected).is_err() {
                return Err(ExceptionReason::BadTx);
            }
            nonce_view.insert(tx.from.clone(), expected + 1);
        }
        let is_last = i as u64 == cfg.n_epoch_blocks - 1;
        if is_last != block.delta_s.is_some() {
            return Err(ExceptionReason::BadWeight);
        }
        parent = block.hash_hex();
        expected_height += 1;
    }

    // VerifyProof(ΔS, π): ΔS must re-derive from the verified proofs.
    let mut flow_pairs: Vec<(AttestedFlow, FlowVerdict)> = Vec::new();
    for off in &ctx.flow_offsets {
        let Some(rec) = da.get(*off) else { continue };
        let Some(attested) = rec.payload.to_attested_flow() else {
            continue;
        };
        let report = reports.get(&attested.transmitter_id);
        let verdict = verify_flow(&attested, report, &ctx.flow_check, ring);
        flow_pairs.push((attested, verdict));
    }
    let expected_delta = weight_deltas(&reports, &flow_pairs, &ctx.rewards);
    let block_delta = proposal
        .blocks
        .last()
        .and_then(|b| b.delta_s.as_ref())
        .ok_or(ExceptionReason::BadWeight)?;
    if *block_delta != expected_delta {
        return Err(ExceptionReason::BadWeight);
    }
    Ok(())
}

/// `VoteCount > 2/3·|Validator|`, strictly: the exception loop's exit
/// condition.
pub fn skip_threshold_met(votes: usize, n_validators: usize) -> bool {
    3 * votes > 2 * n_validators
}

/// One validator's skip vote and its logical arrival tick.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VoteArrival {
    pub voter: String,
    pub tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Chain height kept growing elsewhere: resynchronize.
    Resync,
    /// Stalled: record an empty block at the current height.
    EmptyBlock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkipOutcome {
    pub epoch: u64,
    pub leader: String,
    pub votes_counted: usize,
    pub n_validators: usize,
    pub skipped: bool,
    pub slashed_amount: f64,
    pub fallback: Option<Fallback>,
}

/// Tally skip votes against the logical timer; slash and skip on a strict
/// two-thirds majority, otherwise fall back to a height check.
#[allow(clippy::too_many_arguments)]
pub fn handle_exception(
    votes: &[VoteArrival],
    n_validators: usize,
    leader: &str,
    epoch: u64,
    timer_limit: u64,
    slash_fraction: f64,
    validators: &mut BTreeMap<String, ValidatorState>,
    chain_growing: bool,
) -> SkipOutcome {
    let mut voters: Vec<&str> = votes
        .iter()
        .filter(|v| v.tick <= timer_limit)
        .map(|v| v.voter.as_str())
        .collect();
    voters.sort_unstable();
    voters.dedup();
    let votes_counted = voters.len();
    let skipped = skip_threshold_met(votes_counted, n_validators);
    let mut slashed_amount = 0.0;
    let mut fallback = None;
    if skipped {
        if let Some(v) = validators.get_mut(leader) {
            slashed_amount = v.stake * slash_fraction;
            v.stake -= slashed_amount;
            v.weight_pos = v.stake;
            v.slashed += slashed_amount;
        }
    } else {
        fallback = Some(if chain_growing {
            Fallback::Resync
        } else {
            Fallback::EmptyBlock
        });
    }
    SkipOutcome {
        epoch,
        leader: leader.to_string(),
        votes_counted,
        n_validators,
        skipped,
        slashed_amount,
        fallback,
    }
}
