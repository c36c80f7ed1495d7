//! Protocol engine and deterministic simulator for a decentralized
//! satellite-service network.
//!
//! The crate generates synthetic satellite↔receiver service measurements
//! under a physical attenuation model, runs three proof mechanisms over
//! them, and drives a challenger/validator/leader consensus loop:
//!
//! - [`signal`] — link budget, rain attenuation, fading, and field
//!   generation satisfying the spatial/temporal continuity hypotheses.
//! - [`pod`] — Proof of Distribution: robust spatio-temporal loss, EM
//!   anomaly classification, per-epoch consensus estimates of α.
//! - [`pom`] — Proof of Mesh: multi-party shared-key derivation and the
//!   block-hash-bound join handshake.
//! - [`pof`] — Proof of Flow: per-window Merkle trees with ∅ placeholders,
//!   efficient diffing, the triple-signature two-handshake, delayed commit.
//! - [`consensus`] — VDF-seeded leader election into a FIFO queue, block
//!   packing under a gas limit, proof-transcript verification, weight
//!   updates, and the leader-skip exception protocol.
//! - [`sim`] — declarative scenarios, the epoch runner, reports, and
//!   benchmark kernels.
//!
//! Everything is deterministic given a scenario seed: identical runs
//! produce byte-identical DA logs and reports.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```bash
//! cargo run --example link_budget
//! cargo run --example kernel_terms
//! cargo run --example pod_detection
//! cargo run --example mesh_join
//! cargo run --example flow_attestation
//! cargo run --example leader_rotation
//! cargo run --example full_run
//! ```
//!
//! The `spacenet` binary wraps the same library behind `simulate`, `bench`,
//! and `validate-config` subcommands.

pub mod consensus;
pub mod crypto;
pub mod pod;
pub mod pof;
pub mod pom;
pub mod seed;
pub mod signal;
pub mod sim;

pub use sim::{run_scenario, RunOutput, ScenarioConfig, SimReport};


