//! Per-window Merkle trees and structural diffing.
//!
//! Failed packets are not omitted — they contribute the canonical ∅ leaf, so
//! a challenger cannot silently drop undelivered traffic from its tree.
//! Leaf and internal hashes are domain-separated (0x00 / 0x01 prefixes) to
//! block second-preimage splices; odd-width levels duplicate their last node.

use crate::crypto::{sha256_parts, Hash32};

use super::{FlowError, Packet, PacketStatus};

const LEAF_PREFIX: &[u8] = &[0x00];
const NODE_PREFIX: &[u8] = &[0x01];

/// The ∅ placeholder leaf for an undelivered packet.
pub fn empty_leaf() -> Hash32 {
    sha256_parts(&[LEAF_PREFIX, b"EMPTY"])
}

fn packet_leaf(p: &Packet) -> Hash32 {
    match p.status {
        PacketStatus::Delivered => sha256_parts(&[LEAF_PREFIX, &p.payload_hash]),
        PacketStatus::Failed => empty_leaf(),
    }
}

fn node_hash(left: &Hash32, right: &Hash32) -> Hash32 {
    sha256_parts(&[NODE_PREFIX, left, right])
}

/// Level-ordered Merkle tree; `levels[0]` holds the leaves, the last level
/// the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleTree {
    levels: Vec<Vec<Hash32>>,
}

impl MerkleTree {
    pub fn from_leaves(leaves: Vec<Hash32>) -> Self {
        // Empty windows get the sentinel single-∅ tree.
        let leaves = if leaves.is_empty() {
            vec![empty_leaf()]
        } else {
            leaves
        };
        let mut levels = vec![leaves];
        while levels.last().expect("non-empty").len() > 1 {
            let below = levels.last().expect("non-empty");
            let mut level = Vec::with_capacity(below.len().div_ceil(2));
            for pair in below.chunks(2) {
                let right = pair.get(1).unwrap_or(&pair[0]); // odd: duplicate last
                level.push(node_hash(&pair[0], right));
            }
            levels.push(level);
        }
        Self { levels }
    }

    pub fn root(&self) -> Hash32 {
        self.levels.last().expect("non-empty")[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn leaves(&self) -> &[Hash32] {
        &self.levels[0]
    }

    fn width(&self, level: usize) -> usize {
        self.levels[level].len()
    }
}

/// Build the window tree; Failed packets become ∅ leaves.
pub fn build_merkle(packets: &[Packet]) -> MerkleTree {
    MerkleTree::from_leaves(packets.iter().map(packet_leaf).collect())
}

/// Compare two trees by recursive descent, visiting children only under
/// differing parents.
///
/// Returns the exact differing leaf set and how many node-hash comparisons
/// were performed: 1 for identical trees, `2N - 1` when everything differs,
/// and Θ(k·log N) for k corrupted leaves.
pub fn diff_merkle(a: &MerkleTree, b: &MerkleTree) -> Result<(Vec<usize>, usize), FlowError> {
    if a.leaf_count() != b.leaf_count() {
        return Err(FlowError::ShapeMismatch {
            left: a.leaf_count(),
            right: b.leaf_count(),
        });
    }
    let top = a.levels.len() - 1;
    let mut differing = Vec::new();
    let mut compared = 0usize;
    let mut stack = vec![(top, 0usize)];
    while let Some((level, idx)) = stack.pop() {
        compared += 1;
        if a.levels[level][idx] == b.levels[level][idx] {
            continue;
        }
        if level == 0 {
            differing.push(idx);
            continue;
        }
        let below = level - 1;
        // Right child first so the left pops first: leaf indices come out
        // ascending. A duplicated odd node has no distinct right child.
        let (l, r) = (2 * idx, 2 * idx + 1);
        if r < a.width(below) {
            stack.push((below, r));
        }
        if l < a.width(below) {
            stack.push((below, l));
        }
    }
    Ok((differing, compared))
}
