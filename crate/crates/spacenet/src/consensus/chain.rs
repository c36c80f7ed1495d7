//! Blocks, transactions, the mempool, and the gas-limited packing loop.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::{sha256, to_hex, Hash32, KeyRing};

use super::engine::WeightDelta;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxKind {
    /// References a state-parameter submission already in DA.
    AlphaSubmit { da_offset: u64 },
    /// References a committed flow attestation in DA.
    FlowSubmit { da_offset: u64 },
    Transfer { to: String, amount: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tx {
    pub from: String,
    pub nonce: u64,
    pub gas: u64,
    pub fee: u64,
    #[serde(flatten)]
    pub kind: TxKind,
    pub sig: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TxError {
    BadSignature,
    BadNonce { expected: u64, got: u64 },
    ZeroGas,
}

fn tx_digest(tx: &Tx) -> Hash32 {
    let unsigned = Tx {
        sig: String::new(),
        ..tx.clone()
    };
    sha256(&serde_json::to_vec(&unsigned).expect("tx serializes"))
}

pub fn sign_tx(mut tx: Tx, ring: &KeyRing) -> Tx {
    let digest = tx_digest(&tx);
    tx.sig = to_hex(&ring.sign(&tx.from, "tx", &digest).expect("sender registered"));
    tx
}

/// Signature, nonce order, and positive gas.
pub fn verify_tx(tx: &Tx, ring: &KeyRing, expected_nonce: u64) -> Result<(), TxError> {
    if tx.gas == 0 {
        return Err(TxError::ZeroGas);
    }
    if tx.nonce != expected_nonce {
        return Err(TxError::BadNonce {
            expected: expected_nonce,
            got: tx.nonce,
        });
    }
    let digest = tx_digest(tx);
    let sig = crate::crypto::from_hex(&tx.sig).ok_or(TxError::BadSignature)?;
    if !ring.verify(&tx.from, "tx", &digest, &sig) {
        return Err(TxError::BadSignature);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent_hash: String,
    pub txs: Vec<Tx>,
    /// Present only in the last of the leader's N_ε blocks.
    pub delta_s: Option<BTreeMap<String, WeightDelta>>,
    /// DA offsets of the π records backing this epoch.
    pub proofs_ref: Vec<u64>,
    pub leader_id: String,
    pub leader_sig: String,
}

impl Block {
    pub fn gas_total(&self) -> u64 {
        self.txs.iter().map(|t| t.gas).sum()
    }

    pub fn digest(&self) -> Hash32 {
        let unsigned = Block {
            leader_sig: String::new(),
            ..self.clone()
        };
        sha256(&serde_json::to_vec(&unsigned).expect("block serializes"))
    }

    /// Chain hash: covers the signature too.
    pub fn hash(&self) -> Hash32 {
        sha256(&serde_json::to_vec(self).expect("block serializes"))
    }

    pub fn hash_hex(&self) -> String {
        to_hex(&self.hash())
    }
}

pub fn sign_block(mut block: Block, ring: &KeyRing) -> Block {
    let digest = block.digest();
    block.leader_sig = to_hex(
        &ring
            .sign(&block.leader_id, "block", &digest)
            .expect("leader registered"),
    );
    block
}

pub fn verify_block_sig(block: &Block, ring: &KeyRing) -> bool {
    let Some(sig) = crate::crypto::from_hex(&block.leader_sig) else {
        return false;
    };
    ring.verify(&block.leader_id, "block", &block.digest(), &sig)
}

/// Pending transactions, selected by fee priority.
#[derive(Clone, Debug, Default)]
pub struct Mempool {
    txs: Vec<Tx>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tx: Tx) {
        self.txs.push(tx);
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    /// Highest fee first; ties broken by sender then nonce so sequential
    /// nonces from one account leave in order.
    fn sort(&mut self) {
        self.txs.sort_by(|a, b| {
            b.fee
                .cmp(&a.fee)
                .then_with(|| a.from.cmp(&b.from))
                .then_with(|| a.nonce.cmp(&b.nonce))
        });
    }

    fn pop_best(&mut self) -> Option<Tx> {
        if self.txs.is_empty() {
            None
        } else {
            Some(self.txs.remove(0))
        }
    }

    fn push_front(&mut self, tx: Tx) {
        self.txs.insert(0, tx);
    }
}

/// The leader's packing loop: fill each block by fee priority while the
/// admitted gas stays within `gas_limit`, verifying each transaction; the
/// weight update rides in the final block.
#[allow(clippy::too_many_arguments)]
pub fn pack_blocks(
    leader_id: &str,
    parent_hash: &str,
    start_height: u64,
    n_blocks: u64,
    gas_limit: u64,
    delta_s: BTreeMap<String, WeightDelta>,
    proofs_ref: Vec<u64>,
    mempool: &mut Mempool,
    nonces: &mut BTreeMap<String, u64>,
    ring: &KeyRing,
) -> Vec<Block> {
    mempool.sort();
    let mut blocks = Vec::with_capacity(n_blocks as usize);
    let mut parent = parent_hash.to_string();
    for i in 0..n_blocks {
        let mut txs = Vec::new();
        let mut gas = 0u64;
        while gas < gas_limit && !mempool.is_empty() {
            let tx = mempool.pop_best().expect("non-empty");
            if gas + tx.gas > gas_limit {
                mempool.push_front(tx); // does not fit this block
                break;
            }
            let expected = nonces.get(&tx.from).copied().unwrap_or(0);
            match verify_tx(&tx, ring, expected) {
                Ok(()) => {
                    nonces.insert(tx.from.clone(), expected + 1);
                    gas += tx.gas;
                    txs.push(tx);
                }
                Err(_) => {
                    // invalid: excluded, the rest keeps packing
                    log::debug!("dropping invalid tx from {}", tx.from);
                }
            }
        }
        let block = Block {
            height: start_height + i,
            parent_hash: parent.clone(),
            txs,
            delta_s: if i == n_blocks - 1 {
                Some(delta_s.clone())
            } else {
                None
            },
            proofs_ref: proofs_ref.clone(),
            leader_id: leader_id.to_string(),
            leader_sig: String::new(),
        };
        let block = sign_block(block, ring);
        parent = block.hash_hex();
        blocks.push(block);
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring() -> KeyRing {
        let mut r = KeyRing::new();
        r.register("alice", [1u8; 32]);
        r.register("bob", [2u8; 32]);
        r.register("leader", [3u8; 32]);
        r
    }

    fn transfer(from: &str, nonce: u64, gas: u64, fee: u64, ring: &KeyRing) -> Tx {
        sign_tx(
            Tx {
                from: from.into(),
                nonce,
                gas,
                fee,
                kind: TxKind::Transfer {
                    to: "bob".into(),
                    amount: 1,
                },
                sig: String::new(),
            },
            ring,
        )
    }

    #[test]
    fn tx_verification() {
        let r = ring();
        let tx = transfer("alice", 0, 10, 5, &r);
        assert!(verify_tx(&tx, &r, 0).is_ok());
        assert_eq!(
            verify_tx(&tx, &r, 1),
            Err(TxError::BadNonce {
                expected: 1,
                got: 0
            })
        );
        let mut bad = tx.clone();
        bad.fee += 1; // body changed under the signature
        assert_eq!(verify_tx(&bad, &r, 0), Err(TxError::BadSignature));
        let mut zero = transfer("alice", 0, 10, 5, &r);
        zero.gas = 0;
        assert_eq!(verify_tx(&zero, &r, 0), Err(TxError::ZeroGas));
    }

    #[test]
    fn packing_respects_gas_limit() {
        // ten txs of gas 40, limit 100 → two per block
        let r = ring();
        let mut mempool = Mempool::new();
        for n in 0..10 {
            mempool.insert(transfer("alice", n, 40, 7, &r));
        }
        let mut nonces = BTreeMap::new();
        let blocks = pack_blocks(
            "leader",
            "genesis",
            0,
            5,
            100,
            BTreeMap::new(),
            vec![],
            &mut mempool,
            &mut nonces,
            &r,
        );
        for b in &blocks {
            assert_eq!(b.txs.len(), 2, "height {}", b.height);
            assert!(b.gas_total() <= 100);
        }
        assert!(mempool.is_empty());
    }

    #[test]
    fn empty_mempool_packs_empty_blocks_with_delta() {
        let r = ring();
        let mut mempool = Mempool::new();
        let mut nonces = BTreeMap::new();
        let mut delta = BTreeMap::new();
        delta.insert(
            "rx0".to_string(),
            WeightDelta {
                pod: 1.0,
                pof: 0.5,
            },
        );
        let blocks = pack_blocks(
            "leader", "genesis", 0, 3, 100, delta, vec![7], &mut mempool, &mut nonces, &r,
        );
        assert_eq!(blocks.len(), 3);
        assert!(blocks[0].txs.is_empty());
        assert!(blocks[0].delta_s.is_none());
        assert!(blocks[2].delta_s.is_some());
    }

    #[test]
    fn invalid_tx_excluded_valid_packed() {
        let r = ring();
        let mut mempool = Mempool::new();
        mempool.insert(transfer("alice", 0, 10, 5, &r));
        let mut forged = transfer("bob", 0, 10, 9, &r);
        forged.fee = 100; // breaks the signature and sorts first
        mempool.insert(forged);
        let mut nonces = BTreeMap::new();
        let blocks = pack_blocks(
            "leader",
            "genesis",
            0,
            1,
            1000,
            BTreeMap::new(),
            vec![],
            &mut mempool,
            &mut nonces,
            &r,
        );
        assert_eq!(blocks[0].txs.len(), 1);
        assert_eq!(blocks[0].txs[0].from, "alice");
    }

    #[test]
    fn block_hash_chain_and_signature() {
        let r = ring();
        let mut mempool = Mempool::new();
        let mut nonces = BTreeMap::new();
        let blocks = pack_blocks(
            "leader",
            "genesis",
            0,
            2,
            100,
            BTreeMap::new(),
            vec![],
            &mut mempool,
            &mut nonces,
            &r,
        );
        assert_eq!(blocks[1].parent_hash, blocks[0].hash_hex());
        assert!(verify_block_sig(&blocks[0], &r));
        let mut tampered = blocks[0].clone();
        tampered.height += 1;
        assert!(!verify_block_sig(&tampered, &r));
    }
}
