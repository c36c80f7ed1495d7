//! Iterated-hash delay function used to seed leader election.
//!
//! This is a simulation stand-in: the hash chain is sequential (a delay
//! function) but verification here re-walks the chain, so checkpointing buys
//! only a constant factor, not the asymmetric fast-verify of a real VDF.
//! Election determinism, not timing security, is what the simulator needs;
//! the interface admits a real VDF later.

use crate::crypto::{sha256_parts, Hash32};

fn step(x: &Hash32) -> Hash32 {
    sha256_parts(&[b"vdf-step", x])
}

/// `H^difficulty(seed)`; difficulty 0 returns the seed.
pub fn vdf_eval(seed: &Hash32, difficulty: u64) -> Hash32 {
    let mut x = *seed;
    for _ in 0..difficulty {
        x = step(&x);
    }
    x
}

/// Evaluate while recording a checkpoint every `interval` steps.
pub fn vdf_eval_with_checkpoints(
    seed: &Hash32,
    difficulty: u64,
    interval: u64,
) -> (Hash32, Vec<Hash32>) {
    assert!(interval >= 1);
    let mut x = *seed;
    let mut checkpoints = Vec::new();
    for i in 1..=difficulty {
        x = step(&x);
        if i % interval == 0 {
            checkpoints.push(x);
        }
    }
    (x, checkpoints)
}

/// Re-walk the chain and compare against the claimed output.
pub fn vdf_verify(seed: &Hash32, difficulty: u64, output: &Hash32) -> bool {
    vdf_eval(seed, difficulty) == *output
}

/// Verify using stored checkpoints, aborting at the first mismatching
/// segment. Same total work, earlier exit on corrupt claims.
pub fn vdf_verify_checkpointed(
    seed: &Hash32,
    difficulty: u64,
    interval: u64,
    checkpoints: &[Hash32],
    output: &Hash32,
) -> bool {
    let mut x = *seed;
    let mut next_cp = 0usize;
    for i in 1..=difficulty {
        x = step(&x);
        if i % interval == 0 {
            match checkpoints.get(next_cp) {
                Some(cp) if *cp == x => next_cp += 1,
                _ => return false,
            }
        }
    }
    x == *output
}
