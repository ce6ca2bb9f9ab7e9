//! Lock on the sender chain, mint on the receiving chain.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest as _, Sha256};

use super::chain::{ChainParams, ChainSim};
use super::relay::{FullNode, Prover, Relay};
use super::updater::{HeaderId, Updater, UpdaterConfig};
use crate::error::{invalid, Error, Result};
use crate::merkle::{Digest, MerklePath};

/// A lock transaction, serialized as `lock|user|amount|nonce`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockTx {
    pub user: String,
    pub amount: u64,
    pub nonce: u64,
}

impl LockTx {
    pub fn encode(&self) -> Vec<u8> {
        format!("lock|{}|{}|{}", self.user, self.amount, self.nonce).into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Decode("lock tx is not text".into()))?;
        let parts: Vec<&str> = text.split('|').collect();
        match parts.as_slice() {
            ["lock", user, amount, nonce] if !user.is_empty() => Ok(Self {
                user: user.to_string(),
                amount: amount.parse().map_err(|_| Error::Decode(format!("bad amount {amount:?}")))?,
                nonce: nonce.parse().map_err(|_| Error::Decode(format!("bad nonce {nonce:?}")))?,
            }),
            _ => Err(Error::Decode(format!("not a lock tx: {text:?}"))),
        }
    }
}

/// A claim that `tx` sits in the sender-chain block at `height`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MintRequest {
    pub height: u64,
    pub tx: Vec<u8>,
    pub path: MerklePath,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MintReceipt {
    pub user: String,
    pub amount: u64,
    pub lock_tx: Digest,
    pub height: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MintError {
    Malformed,
    /// Header unknown, not yet confirmed, or the path does not verify.
    NotIncluded,
    AlreadyMinted,
}

/// The receiving chain's token contract.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MintContract {
    balances: BTreeMap<String, u64>,
    minted: BTreeSet<Digest>,
}

impl MintContract {
    pub fn balance(&self, user: &str) -> u64 {
        self.balances.get(user).copied().unwrap_or(0)
    }

    pub fn mint(&mut self, updater: &Updater, req: &MintRequest) -> std::result::Result<MintReceipt, MintError> {
        let lock = LockTx::parse(&req.tx).map_err(|_| MintError::Malformed)?;
        if !updater.verify_tx_inclusion(HeaderId::Height(req.height), &req.tx, &req.path) {
            return Err(MintError::NotIncluded);
        }
        let id: Digest = Sha256::digest(&req.tx).into();
        if !self.minted.insert(id) {
            return Err(MintError::AlreadyMinted);
        }
        *self.balances.entry(lock.user.clone()).or_default() += lock.amount;
        Ok(MintReceipt { user: lock.user, amount: lock.amount, lock_tx: id, height: req.height })
    }
}

/// What the demo observed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockMintReport {
    pub receipt: MintReceipt,
    pub premature: MintError,
    pub replay: MintError,
    pub balance: u64,
    /// Hash of the updater snapshot and the contract state.
    pub state_hash: Digest,
}

/// Locks `amount` for `user` on a fresh sender chain, relays the block and
/// mints on the receiving side. Also tries to mint before the relay and to
/// replay the mint.
pub fn lock_mint_demo(seed: u64, user: &str, amount: u64) -> Result<LockMintReport> {
    if user.is_empty() || user.contains('|') {
        return invalid("user names are non-empty and contain no '|'");
    }
    let params = ChainParams { committee_size: 4, signers: 3, rotation: 4, rounds: 8, seed };
    let config = UpdaterConfig::default();
    let mut chain = ChainSim::new(params)?;
    let mut updater = Updater::new(chain.genesis().header.clone(), config);
    let mut relay = Relay::new("lock-mint-relay", chain.genesis().digest(), params.rounds, config.proof, Prover::Local);
    let nodes = [FullNode::HONEST; 3];
    let mut contract = MintContract::default();

    let lock = LockTx { user: user.to_string(), amount, nonce: seed };
    let mut rng = chain.seeded_rng(7);
    let filler = ChainSim::random_tx(&mut rng);
    let block = chain.produce_block(vec![filler, lock.encode()])?.clone();
    let req = MintRequest { height: block.header.height, tx: lock.encode(), path: block.tx_path(2)? };

    let premature = contract.mint(&updater, &req).expect_err("header not yet relayed");
    for _ in 0..config.confirmations {
        chain.produce_block(vec![])?;
    }
    while relay.step(&chain, &nodes, &mut updater, 1).is_ok() {}
    let receipt = contract.mint(&updater, &req).map_err(|e| Error::InvalidArgument(format!("mint failed: {e:?}")))?;
    let replay = contract.mint(&updater, &req).expect_err("second mint of the same lock");

    let mut h = Sha256::new();
    h.update(updater.snapshot());
    for (u, b) in &contract.balances {
        h.update(u.as_bytes());
        h.update(b.to_le_bytes());
    }
    Ok(LockMintReport {
        receipt,
        premature,
        replay,
        balance: contract.balance(user),
        state_hash: h.finalize().into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_tx_round_trip() {
        let tx = LockTx { user: "alice".into(), amount: 5, nonce: 9 };
        assert_eq!(LockTx::parse(&tx.encode()).unwrap(), tx);
        assert!(LockTx::parse(b"lock|alice|x|1").is_err());
        assert!(LockTx::parse(b"mint|alice|5|1").is_err());
        assert!(LockTx::parse(b"lock||5|1").is_err());
    }

    #[test]
    fn demo_credits_exactly_once() {
        let r = lock_mint_demo(3, "alice", 5).unwrap();
        assert_eq!(r.balance, 5);
        assert_eq!(r.receipt.amount, 5);
        assert_eq!(r.premature, MintError::NotIncluded);
        assert_eq!(r.replay, MintError::AlreadyMinted);
        assert_eq!(lock_mint_demo(3, "alice", 5).unwrap(), r);
        assert_ne!(lock_mint_demo(4, "alice", 5).unwrap().state_hash, r.state_hash);
    }
}
