//! Benchmark kernels for the two proof engines.
//!
//! Absolute times are informational — they depend on the host — so the
//! acceptance suite asserts only scaling shape: the distribution proof has
//! an O(N²) neighbourhood kernel (all receivers mutually in range here),
//! the flow proof is near-linear in windows and grows with packet length.

use std::time::Instant;

use rand::Rng;

use crate::pod::{pod_epoch, PodConfig, PodSample, PriorSet};
use crate::pof::{two_handshake, verify_flow, FlowCheckConfig, FlowWindow, Packet, PacketStatus};
use crate::crypto::{sha256_parts, KeyRing};
use crate::pod::{Classification, PodReport, ReceiverReport};
use crate::seed::SeedTree;
use crate::signal::{AlphaMap, Position, PARAM_SIGNAL};

use super::report::BenchRow;

/// One cold-start distribution-proof epoch over `n` receivers placed so
/// that every pair interacts (the quadratic regime the benchmark tables
/// describe).
pub fn bench_pod(n_receivers: usize) -> BenchRow {
    assert!(n_receivers >= 2);
    let tree = SeedTree::new(0xB0D);
    let mut rng = tree.derive("bench-pod").rng();
    let disk = 1_000.0;
    let mut samples = Vec::with_capacity(n_receivers);
    for i in 0..n_receivers {
        let angle: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let radius: f64 = rng.gen::<f64>().sqrt() * disk;
        let mut alpha = AlphaMap::new();
        let noise: f64 = rng.gen::<f64>() - 0.5;
        let value = 10.0 + noise * 0.4 + if i % 20 == 0 { -3.0 } else { 0.0 };
        alpha.insert(PARAM_SIGNAL.into(), value);
        alpha.insert("online".into(), 1.0);
        samples.push(PodSample {
            receiver_id: format!("rx{i:05}"),
            transmitter_id: "sat0".into(),
            position: Position::new(angle.cos() * radius, angle.sin() * radius, 0.0),
            time: 0.0,
            alpha,
        });
    }
    let config = PodConfig {
        // kernel range 3σ covers the whole disk: every pair contributes
        sigma_alpha: disk,
        neighborhood_radius: 4.0 * disk,
        theta_r: 0.6,
        ..PodConfig::with_priors(PriorSet::default_two_component())
    };
    let start = Instant::now();
    let (report, _) = pod_epoch(&samples, None, &config).expect("bench scenario is valid");
    let seconds = start.elapsed().as_secs_f64();
    assert!(report.per_receiver.len() == n_receivers);
    BenchRow {
        kind: "pod".into(),
        n: n_receivers as u64,
        packet_len: None,
        seconds,
    }
}

/// `n` window attestations of `packet_len` packets each: build both trees,
/// run the two-handshake, verify against a fixed distribution context.
pub fn bench_pof(n_receivers: usize, packet_len: usize) -> BenchRow {
    assert!(n_receivers >= 2 && packet_len >= 1);
    let mut ring = KeyRing::new();
    ring.register("sat0", [1u8; 32]);
    let check = FlowCheckConfig::default();
    let signal = check.sensitivity_dbm + 12.0;
    let mut report = PodReport::empty("sat0", 0);
    let tree = SeedTree::new(0xF10);
    let mut windows = Vec::with_capacity(n_receivers);
    for i in 0..n_receivers {
        let challenger = format!("rx{i:05}");
        ring.register(&challenger, tree.derive(&challenger).seed_bytes());
        let mut alpha_hat = AlphaMap::new();
        alpha_hat.insert(PARAM_SIGNAL.into(), signal);
        report.per_receiver.insert(
            challenger.clone(),
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
        let packets: Vec<Packet> = (0..packet_len)
            .map(|seq| Packet {
                seq: seq as u64,
                payload_hash: sha256_parts(&[
                    b"bench",
                    challenger.as_bytes(),
                    &(seq as u64).to_le_bytes(),
                ]),
                payload_len: 1_200,
                status: if seq % 97 == 0 {
                    PacketStatus::Failed
                } else {
                    PacketStatus::Delivered
                },
            })
            .collect();
        windows.push(FlowWindow {
            window_index: 0,
            transmitter_id: "sat0".into(),
            challenger_id: challenger,
            packets,
        });
    }

    let start = Instant::now();
    let mut accepted = 0usize;
    for window in &windows {
        let attested =
            two_handshake(window, window, &ring, &ring).expect("honest handshake");
        if verify_flow(&attested, Some(&report), &check, &ring).is_ok() {
            accepted += 1;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    assert!(accepted > 0);
    BenchRow {
        kind: "pof".into(),
        n: n_receivers as u64,
        packet_len: Some(packet_len as u64),
        seconds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_rows_have_positive_timings() {
        let pod = bench_pod(64);
        assert!(pod.seconds > 0.0);
        assert_eq!(pod.n, 64);
        let pof = bench_pof(16, 32);
        assert!(pof.seconds > 0.0);
        assert_eq!(pof.packet_len, Some(32));
    }
}
