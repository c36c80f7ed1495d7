//! Two-handshake attestation, delayed commit, and PoD-consistency checks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::crypto::{Hash32, KeyRing};
use crate::pod::PodReport;
use crate::signal::PARAM_SIGNAL;

use super::merkle::{build_merkle, diff_merkle};
use super::{AttestedFlow, FlowWindow};

/// Why a window attestation was dropped or refused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FlowRejection {
    /// A signature in the chain failed to verify.
    SigFail { stage: String },
    /// The two parties' trees disagree. Shape mismatches (omitted ∅
    /// placeholders) carry no leaf set.
    TreeMismatch {
        differing_leaves: Vec<usize>,
        shape_mismatch: bool,
    },
    /// No distribution-proof context covers this window.
    NoPodContext,
    /// The challenger is not part of the covering distribution proof.
    UnknownReceiver,
    /// Failed-packet share inconsistent with the estimated link state.
    InconsistentErrorShare {
        observed: f64,
        implied: f64,
        p_value: f64,
    },
}

pub type FlowVerdict = Result<(), FlowRejection>;

fn root_context(window: &FlowWindow, root: &Hash32) -> Vec<u8> {
    let mut msg = Vec::with_capacity(64);
    msg.extend_from_slice(&window.window_index.to_le_bytes());
    msg.extend_from_slice(window.transmitter_id.as_bytes());
    msg.push(0);
    msg.extend_from_slice(window.challenger_id.as_bytes());
    msg.push(0);
    msg.extend_from_slice(root);
    msg
}

/// Run the T → C → T two-handshake over both parties' packet views.
///
/// The transmitter signs its bound root; the challenger rebuilds its own
/// tree, verifies signature and tree equality, counter-signs; the
/// transmitter verifies and final-signs. Each party verifies through its own
/// ring, so key mismatches surface as `SigFail` exactly where a forgery
/// would.
pub fn two_handshake(
    t_view: &FlowWindow,
    c_view: &FlowWindow,
    t_ring: &KeyRing,
    c_ring: &KeyRing,
) -> Result<AttestedFlow, FlowRejection> {
    debug_assert!(
        t_view.window_index == c_view.window_index
            && t_view.transmitter_id == c_view.transmitter_id
            && t_view.challenger_id == c_view.challenger_id,
        "views must describe the same window"
    );
    let tree_t = build_merkle(&t_view.packets);
    let root = tree_t.root();
    let ctx = root_context(t_view, &root);
    let sig_t1 = t_ring
        .sign(&t_view.transmitter_id, "pof-root", &ctx)
        .ok_or(FlowRejection::SigFail {
            stage: "transmitter-unregistered".into(),
        })?;

    // Challenger side: verify, rebuild, compare.
    if !c_ring.verify(&t_view.transmitter_id, "pof-root", &ctx, &sig_t1) {
        return Err(FlowRejection::SigFail {
            stage: "challenger-verifies-transmitter".into(),
        });
    }
    let tree_c = build_merkle(&c_view.packets);
    if tree_c.root() != root {
        let (differing_leaves, shape_mismatch) = match diff_merkle(&tree_t, &tree_c) {
            Ok((leaves, _)) => (leaves, false),
            Err(_) => (Vec::new(), true),
        };
        return Err(FlowRejection::TreeMismatch {
            differing_leaves,
            shape_mismatch,
        });
    }
    let sig_c = c_ring
        .sign(&c_view.challenger_id, "pof-counter", &sig_t1)
        .ok_or(FlowRejection::SigFail {
            stage: "challenger-unregistered".into(),
        })?;

    // Transmitter verifies the counter-signature and final-signs.
    if !t_ring.verify(&c_view.challenger_id, "pof-counter", &sig_t1, &sig_c) {
        return Err(FlowRejection::SigFail {
            stage: "transmitter-verifies-challenger".into(),
        });
    }
    let sig_t2 = t_ring
        .sign(&t_view.transmitter_id, "pof-final", &sig_c)
        .expect("transmitter signed above");

    Ok(AttestedFlow {
        transmitter_id: t_view.transmitter_id.clone(),
        challenger_id: t_view.challenger_id.clone(),
        window_index: t_view.window_index,
        root,
        sig_chain: [sig_t1, sig_c, sig_t2],
        byte_count: t_view.byte_count(),
        leaf_count: t_view.packets.len().max(1) as u32,
        failed_count: t_view.failed_count(),
        committed_at: None,
    })
}

/// Verify the T → C → T signature chain of a committed attestation.
pub fn verify_chain(attested: &AttestedFlow, ring: &KeyRing) -> FlowVerdict {
    let window = FlowWindow {
        window_index: attested.window_index,
        transmitter_id: attested.transmitter_id.clone(),
        challenger_id: attested.challenger_id.clone(),
        packets: Vec::new(),
    };
    let ctx = root_context(&window, &attested.root);
    let [sig_t1, sig_c, sig_t2] = &attested.sig_chain;
    if !ring.verify(&attested.transmitter_id, "pof-root", &ctx, sig_t1) {
        return Err(FlowRejection::SigFail { stage: "sig_t1".into() });
    }
    if !ring.verify(&attested.challenger_id, "pof-counter", sig_t1, sig_c) {
        return Err(FlowRejection::SigFail { stage: "sig_c".into() });
    }
    if !ring.verify(&attested.transmitter_id, "pof-final", sig_c, sig_t2) {
        return Err(FlowRejection::SigFail { stage: "sig_t2".into() });
    }
    Ok(())
}

/// Delayed commit: attestations become eligible for submission only `delay`
/// windows after the window they describe, FIFO by window index.
#[derive(Clone, Debug)]
pub struct CommitScheduler {
    delay: u64,
    pending: VecDeque<AttestedFlow>,
}

impl CommitScheduler {
    pub fn new(delay: u64) -> Self {
        assert!(delay >= 1, "delay must be >= 1");
        Self {
            delay,
            pending: VecDeque::new(),
        }
    }

    pub fn delay(&self) -> u64 {
        self.delay
    }

    pub fn submit(&mut self, attested: AttestedFlow) {
        // Keep FIFO eligibility order even for out-of-order submissions.
        let at = self
            .pending
            .iter()
            .position(|p| p.window_index > attested.window_index)
            .unwrap_or(self.pending.len());
        self.pending.insert(at, attested);
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Release every attestation whose delay has expired.
    pub fn release(&mut self, current_window: u64) -> Vec<AttestedFlow> {
        let mut out = Vec::new();
        while let Some(front) = self.pending.front() {
            if front.window_index + self.delay <= current_window {
                let mut a = self.pending.pop_front().expect("front exists");
                a.committed_at = Some(current_window);
                out.push(a);
            } else {
                break;
            }
        }
        out
    }
}

/// Consistency parameters for [`verify_flow`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowCheckConfig {
    /// Online threshold the logistic failure curve is centred on, dBm.
    pub sensitivity_dbm: f64,
    /// Logistic slope scale, dB.
    pub logistic_scale_db: f64,
    /// Two-sided binomial test size; windows with a p-value below this are
    /// rejected as inconsistent.
    pub test_alpha: f64,
}

impl Default for FlowCheckConfig {
    fn default() -> Self {
        Self {
            sensitivity_dbm: -120.0,
            logistic_scale_db: 2.0,
            test_alpha: 1e-6,
        }
    }
}

/// Packet failure probability implied by a link's signal level.
pub fn implied_failure_rate(signal_dbm: f64, check: &FlowCheckConfig) -> f64 {
    let z = (check.sensitivity_dbm - signal_dbm) / check.logistic_scale_db;
    1.0 / (1.0 + (-z).exp())
}

/// Two-sided binomial p-value of observing `failed` failures in `n` trials
/// at rate `p`.
fn binomial_two_sided(failed: u64, n: u64, p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    let bin = Binomial::new(p, n).expect("p in (0,1), n >= 1");
    let cdf_le = bin.cdf(failed);
    let p_ge = if failed == 0 { 1.0 } else { 1.0 - bin.cdf(failed - 1) };
    (2.0 * cdf_le.min(p_ge)).min(1.0)
}

/// Accept a committed attestation iff its signature chain verifies and its
/// failed-leaf share is statistically consistent with the failure rate the
/// distribution proof implies for this challenger's link.
pub fn verify_flow(
    attested: &AttestedFlow,
    pod_report: Option<&PodReport>,
    check: &FlowCheckConfig,
    ring: &KeyRing,
) -> FlowVerdict {
    verify_chain(attested, ring)?;
    let report = pod_report.ok_or(FlowRejection::NoPodContext)?;
    let receiver = report
        .per_receiver
        .get(&attested.challenger_id)
        .ok_or(FlowRejection::UnknownReceiver)?;
    let signal = receiver
        .alpha_hat
        .get(PARAM_SIGNAL)
        .copied()
        .unwrap_or(f64::NEG_INFINITY);
    let implied = implied_failure_rate(signal, check);
    let n = attested.leaf_count as u64;
    let observed = attested.failed_count as f64 / n.max(1) as f64;
    let p_value = binomial_two_sided(attested.failed_count as u64, n.max(1), implied);
    if p_value < check.test_alpha {
        return Err(FlowRejection::InconsistentErrorShare {
            observed,
            implied,
            p_value,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256;
    use crate::pod::{Classification, PodReport, ReceiverReport};
    use crate::pof::{Packet, PacketStatus};
    use crate::signal::AlphaMap;

    fn ring() -> KeyRing {
        let mut r = KeyRing::new();
        r.register("t0", [1u8; 32]);
        r.register("c0", [2u8; 32]);
        r
    }

    fn window(n: usize, failed: &[usize]) -> FlowWindow {
        FlowWindow {
            window_index: 7,
            transmitter_id: "t0".into(),
            challenger_id: "c0".into(),
            packets: (0..n)
                .map(|i| Packet {
                    seq: i as u64,
                    payload_hash: sha256(format!("p{i}").as_bytes()),
                    payload_len: 1200,
                    status: if failed.contains(&i) {
                        PacketStatus::Failed
                    } else {
                        PacketStatus::Delivered
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn honest_views_attest() {
        let w = window(16, &[3]);
        let r = ring();
        let a = two_handshake(&w, &w, &r, &r).unwrap();
        assert!(verify_chain(&a, &r).is_ok());
        assert_eq!(a.failed_count, 1);
        // β conservation: delivered payload bytes only
        assert_eq!(a.byte_count, 15 * 1200);
    }

    #[test]
    fn omitted_placeholder_is_tree_mismatch() {
        let t = window(16, &[3]);
        let mut c = t.clone();
        c.packets.remove(3); // omission instead of ∅
        let r = ring();
        match two_handshake(&t, &c, &r, &r) {
            Err(FlowRejection::TreeMismatch { shape_mismatch, .. }) => assert!(shape_mismatch),
            other => panic!("expected TreeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn disagreeing_leaf_reported_exactly() {
        let t = window(16, &[]);
        let mut c = t.clone();
        c.packets[11].status = PacketStatus::Failed;
        let r = ring();
        match two_handshake(&t, &c, &r, &r) {
            Err(FlowRejection::TreeMismatch {
                differing_leaves,
                shape_mismatch,
            }) => {
                assert!(!shape_mismatch);
                assert_eq!(differing_leaves, vec![11]);
            }
            other => panic!("expected TreeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn forged_challenger_key_fails_at_transmitter() {
        let w = window(8, &[]);
        let t_ring = ring();
        let mut c_ring = ring();
        c_ring.register("c0", [99u8; 32]); // key T does not recognize
        match two_handshake(&w, &w, &t_ring, &c_ring) {
            Err(FlowRejection::SigFail { stage }) => {
                assert_eq!(stage, "transmitter-verifies-challenger");
            }
            other => panic!("expected SigFail, got {other:?}"),
        }
    }

    #[test]
    fn tampered_chain_rejected() {
        let w = window(8, &[]);
        let r = ring();
        let good = two_handshake(&w, &w, &r, &r).unwrap();
        for i in 0..3 {
            let mut bad = good.clone();
            bad.sig_chain[i][0] ^= 1;
            assert!(verify_chain(&bad, &r).is_err(), "sig {i} flip accepted");
        }
        let mut bad = good;
        bad.root[0] ^= 1;
        assert!(verify_chain(&bad, &r).is_err());
    }

    #[test]
    fn scheduler_delays_and_orders() {
        let r = ring();
        let mut sched = CommitScheduler::new(2);
        for wi in [5u64, 3, 4] {
            let mut w = window(4, &[]);
            w.window_index = wi;
            sched.submit(two_handshake(&w, &w, &r, &r).unwrap());
        }
        assert!(sched.release(4).is_empty()); // D=2: window 3 needs >= 5
        let out = sched.release(5);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].window_index, 3);
        assert_eq!(out[0].committed_at, Some(5));
        let out = sched.release(10);
        assert_eq!(
            out.iter().map(|a| a.window_index).collect::<Vec<_>>(),
            vec![4, 5]
        );
    }

    #[test]
    fn scheduler_d1_immediate_next_window() {
        let r = ring();
        let mut sched = CommitScheduler::new(1);
        let w = window(4, &[]);
        sched.submit(two_handshake(&w, &w, &r, &r).unwrap());
        assert_eq!(sched.release(8).len(), 1); // submitted for w=7, at w+1
    }

    fn pod_context(signal: f64) -> PodReport {
        let mut report = PodReport::empty("t0", 7);
        let mut alpha_hat = AlphaMap::new();
        alpha_hat.insert(PARAM_SIGNAL.into(), signal);
        report.per_receiver.insert(
            "c0".into(),
            ReceiverReport {
                alpha_hat,
                loss: 0.0,
                classification: Classification::Valid,
                responsibility: 0.0,
                anomaly_family: None,
                isolated: false,
                cold_start: false,
            },
        );
        report
    }

    #[test]
    fn consistent_error_share_accepted() {
        let check = FlowCheckConfig::default();
        // signal 10 dB above sensitivity → implied failure ≈ 0.0067
        let report = pod_context(check.sensitivity_dbm + 10.0);
        let implied = implied_failure_rate(check.sensitivity_dbm + 10.0, &check);
        let n = 1000usize;
        let failed = (implied * n as f64).round() as usize;
        let fails: Vec<usize> = (0..failed).collect();
        let w = window(n, &fails);
        let r = ring();
        let a = two_handshake(&w, &w, &r, &r).unwrap();
        assert!(verify_flow(&a, Some(&report), &check, &r).is_ok());
    }

    #[test]
    fn gross_error_share_rejected() {
        // implied 1%, observed 40% over 1000 packets → p-value far below 1e-6
        let check = FlowCheckConfig {
            logistic_scale_db: 2.0,
            ..Default::default()
        };
        let signal = check.sensitivity_dbm + 2.0 * (0.99f64 / 0.01).ln(); // implied 1%
        let report = pod_context(signal);
        let fails: Vec<usize> = (0..400).collect();
        let w = window(1000, &fails);
        let r = ring();
        let a = two_handshake(&w, &w, &r, &r).unwrap();
        match verify_flow(&a, Some(&report), &check, &r) {
            Err(FlowRejection::InconsistentErrorShare { p_value, implied, .. }) => {
                assert!((implied - 0.01).abs() < 1e-6);
                assert!(p_value < 1e-6, "p={p_value}");
            }
            other => panic!("expected InconsistentErrorShare, got {other:?}"),
        }
    }

    #[test]
    fn missing_pod_context_rejected() {
        let w = window(8, &[]);
        let r = ring();
        let a = two_handshake(&w, &w, &r, &r).unwrap();
        assert_eq!(
            verify_flow(&a, None, &FlowCheckConfig::default(), &r),
            Err(FlowRejection::NoPodContext)
        );
    }

    #[test]
    fn broken_middle_signature_rejected_before_statistics() {
        let check = FlowCheckConfig::default();
        let report = pod_context(check.sensitivity_dbm + 40.0);
        let w = window(64, &[]);
        let r = ring();
        let mut a = two_handshake(&w, &w, &r, &r).unwrap();
        a.sig_chain[1][5] ^= 0x80;
        match verify_flow(&a, Some(&report), &check, &r) {
            Err(FlowRejection::SigFail { stage }) => assert_eq!(stage, "sig_c"),
            other => panic!("expected SigFail, got {other:?}"),
        }
    }
}
