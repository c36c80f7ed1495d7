//! Deterministic proof-transcript mock with the Gen/Prove/Verify contract.
//!
//! A transcript commits to the DA inputs and the claimed output of one
//! registered computation. Verification fetches the same DA records,
//! re-executes the computation, and checks both commitments — the honest
//! stand-in for a succinct proof, with the same accept/reject behaviour
//! under tampering.

use serde::{Deserialize, Serialize};

use crate::crypto::{sha256_parts, to_hex, Hash32, KeyRing};
use crate::pod::{pod_epoch, PodConfig, PodSample, PodState};
use crate::pof::{verify_flow, FlowCheckConfig};

use super::da::{DaPayload, DaStore};

/// Registered deterministic computations a transcript can claim.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum ComputeFnId {
    PodEpoch,
    FlowVerify,
    /// Unknown to this build; always fails verification.
    Opaque(String),
}

impl From<String> for ComputeFnId {
    fn from(s: String) -> Self {
        match s.as_str() {
            "pod_epoch" => ComputeFnId::PodEpoch,
            "flow_verify" => ComputeFnId::FlowVerify,
            _ => ComputeFnId::Opaque(s),
        }
    }
}

impl From<ComputeFnId> for String {
    fn from(f: ComputeFnId) -> String {
        match f {
            ComputeFnId::PodEpoch => "pod_epoch".into(),
            ComputeFnId::FlowVerify => "flow_verify".into(),
            ComputeFnId::Opaque(s) => s,
        }
    }
}

/// Replay parameters for a distribution-proof transcript.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PodReplayParams {
    pub transmitter: String,
    pub epoch: u64,
    pub config: PodConfig,
    /// DA offset of the previous epoch's state snapshot, if warm-started.
    pub prev_state_offset: Option<u64>,
}

/// Replay parameters for a flow-verification transcript.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowReplayParams {
    pub check: FlowCheckConfig,
    /// DA offset of the covering distribution report.
    pub pod_report_offset: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProofTranscript {
    pub statement_id: String,
    pub compute_fn: ComputeFnId,
    /// Offsets of every DA record the computation consumed.
    pub da_inputs: Vec<u64>,
    /// Canonical JSON of the registered function's parameters.
    pub params: String,
    pub input_commitment: String,
    pub output_commitment: String,
    pub replay_seed: u64,
}

fn commit_inputs(da: &DaStore, offsets: &[u64], params: &str) -> Option<Hash32> {
    let mut blobs: Vec<Vec<u8>> = Vec::with_capacity(offsets.len() + 1);
    for off in offsets {
        let rec = da.get(*off)?;
        blobs.push(serde_json::to_vec(rec).expect("DA records serialize"));
    }
    blobs.push(params.as_bytes().to_vec());
    let parts: Vec<&[u8]> = blobs.iter().map(|b| b.as_slice()).collect();
    Some(sha256_parts(&parts))
}

fn commit_output(output_json: &str) -> Hash32 {
    sha256_parts(&[b"output", output_json.as_bytes()])
}

/// Hex commitment for an output blob, for binding published records to the
/// transcript that produced them.
pub fn output_commitment_hex(output_json: &str) -> String {
    to_hex(&commit_output(output_json))
}

/// Record commitments for a computation whose inputs already live in DA.
pub fn prove(
    statement_id: &str,
    compute_fn: ComputeFnId,
    da_inputs: Vec<u64>,
    params: String,
    output_json: &str,
    replay_seed: u64,
    da: &DaStore,
) -> Option<ProofTranscript> {
    let input_commitment = commit_inputs(da, &da_inputs, &params)?;
    Some(ProofTranscript {
        statement_id: statement_id.to_string(),
        compute_fn,
        da_inputs,
        params,
        input_commitment: to_hex(&input_commitment),
        output_commitment: to_hex(&commit_output(output_json)),
        replay_seed,
    })
}

/// Re-execute the committed computation over DA inputs and check both
/// commitments.
pub fn verify_transcript(pi: &ProofTranscript, da: &DaStore, ring: &KeyRing) -> bool {
    let Some(inputs) = commit_inputs(da, &pi.da_inputs, &pi.params) else {
        return false;
    };
    if to_hex(&inputs) != pi.input_commitment {
        return false;
    }
    let output_json = match &pi.compute_fn {
        ComputeFnId::PodEpoch => replay_pod(pi, da),
        ComputeFnId::FlowVerify => replay_flow(pi, da, ring),
        ComputeFnId::Opaque(_) => None,
    };
    match output_json {
        Some(json) => to_hex(&commit_output(&json)) == pi.output_commitment,
        None => false,
    }
}

fn replay_pod(pi: &ProofTranscript, da: &DaStore) -> Option<String> {
    let params: PodReplayParams = serde_json::from_str(&pi.params).ok()?;
    let mut samples = Vec::new();
    for off in &pi.da_inputs {
        if Some(*off) == params.prev_state_offset {
            continue;
        }
        let rec = da.get(*off)?;
        let DaPayload::Alpha {
            transmitter,
            receiver,
            epoch,
            position,
            alpha,
        } = &rec.payload
        else {
            return None;
        };
        if *transmitter != params.transmitter || *epoch != params.epoch {
            return None;
        }
        samples.push(PodSample {
            receiver_id: receiver.clone(),
            transmitter_id: transmitter.clone(),
            position: *position,
            time: *epoch as f64,
            alpha: alpha.clone(),
        });
    }
    let prev_state: Option<PodState> = match params.prev_state_offset {
        Some(off) => {
            let rec = da.get(off)?;
            let DaPayload::PodState { state, .. } = &rec.payload else {
                return None;
            };
            Some(state.clone())
        }
        None => None,
    };
    let (report, _) = pod_epoch(&samples, prev_state.as_ref(), &params.config).ok()?;
    serde_json::to_string(&report).ok()
}

fn replay_flow(pi: &ProofTranscript, da: &DaStore, ring: &KeyRing) -> Option<String> {
    let params: FlowReplayParams = serde_json::from_str(&pi.params).ok()?;
    let report = {
        let rec = da.get(params.pod_report_offset)?;
        let DaPayload::PodReport { report } = &rec.payload else {
            return None;
        };
        report.clone()
    };
    let mut verdicts = Vec::new();
    for off in &pi.da_inputs {
        if *off == params.pod_report_offset {
            continue;
        }
        let rec = da.get(*off)?;
        let attested = rec.payload.to_attested_flow()?;
        let verdict = verify_flow(&attested, Some(&report), &params.check, ring);
        verdicts.push((*off, verdict));
    }
    serde_json::to_string(&verdicts).ok()
}
