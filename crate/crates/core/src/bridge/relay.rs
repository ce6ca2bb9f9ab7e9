//! Relay nodes: fetch the next header from several full nodes, prove it and
//! hand the envelope to the updater.

use super::chain::{Block, ChainSim};
use super::envelope::RelayEnvelope;
use super::light_client::{statement_input, HeaderStatement};
use super::updater::{Outcome, Updater};
use crate::devirgo::{devirgo_prove, virgo_prove, Cluster, ProofConfig};
use crate::error::{invalid, Error, Result};
use crate::field::FieldElement;
use crate::merkle::Digest;

/// How a simulated full node answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeBehavior {
    Honest,
    /// Sees the canonical chain only up to this height.
    Behind(u64),
    /// Serves a header with a tampered transaction root.
    Forging,
}

/// A full node of the sender chain, as seen by a relay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FullNode {
    pub behavior: NodeBehavior,
}

impl FullNode {
    pub const HONEST: Self = Self { behavior: NodeBehavior::Honest };

    /// The canonical child of `after`, with its signers' witnesses and
    /// committee keys.
    pub fn next_block(&self, chain: &ChainSim, after: &Digest) -> Option<(Block, Vec<FieldElement>)> {
        let mut block = chain.canonical_child(after)?.clone();
        match self.behavior {
            NodeBehavior::Honest => {}
            NodeBehavior::Behind(h) if block.header.height > h => return None,
            NodeBehavior::Behind(_) => {}
            NodeBehavior::Forging => block.header.tx_root.0[0] ^= 0x5a,
        }
        let keys = chain.keys_for(block.header.height);
        Some((block, keys))
    }
}

/// Failure to produce an envelope.
#[derive(Debug)]
pub enum RelayError {
    /// No majority of full nodes agreed on a next header; try again later.
    Retry,
    Failed(Error),
}

impl From<Error> for RelayError {
    fn from(e: Error) -> Self {
        RelayError::Failed(e)
    }
}

impl std::fmt::Display for RelayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RelayError::Retry => write!(f, "no majority among full nodes, retry later"),
            RelayError::Failed(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RelayError {}

/// Asks every node for the child of `after` and returns the answer shared by
/// a strict majority of them.
pub fn majority_next(chain: &ChainSim, nodes: &[FullNode], after: &Digest) -> Option<(Block, Vec<FieldElement>)> {
    let answers: Vec<_> = nodes.iter().filter_map(|n| n.next_block(chain, after)).collect();
    answers.iter().find_map(|(b, keys)| {
        let votes = answers.iter().filter(|(o, _)| o.header == b.header).count();
        (2 * votes > nodes.len()).then(|| (b.clone(), keys.clone()))
    })
}

pub enum Prover {
    Local,
    Cluster(Cluster),
}

pub struct Relay {
    pub identity: Vec<u8>,
    pub rounds: usize,
    pub proof: ProofConfig,
    pub prover: Prover,
    /// Last header this relay knows the updater holds.
    cursor: Digest,
}

impl Relay {
    pub fn new(identity: impl Into<Vec<u8>>, genesis: Digest, rounds: usize, proof: ProofConfig, prover: Prover) -> Self {
        Self { identity: identity.into(), rounds, proof, prover, cursor: genesis }
    }

    pub fn cursor(&self) -> Digest {
        self.cursor
    }

    pub fn set_cursor(&mut self, digest: Digest) {
        self.cursor = digest;
    }

    /// Proves `blocks`, a parent-linked run starting right after `parent`.
    pub fn prove(&mut self, parent: Digest, blocks: &[Block], committees: Vec<Vec<FieldElement>>) -> Result<RelayEnvelope> {
        if blocks.is_empty() || !blocks.len().is_power_of_two() {
            return invalid(format!("batch of {} headers is not a power of two", blocks.len()));
        }
        let mut prev = parent;
        for b in blocks {
            if b.header.parent != prev {
                return invalid(format!("header at height {} does not extend its predecessor", b.header.height));
            }
            prev = b.digest();
        }
        let headers: Vec<_> = blocks.iter().map(|b| b.header.clone()).collect();
        let witnesses: Vec<_> = blocks.iter().map(|b| b.witnesses.clone()).collect();
        let statement = HeaderStatement::new(&headers, &committees, self.rounds)?;
        let input = statement_input(&headers, &committees, &witnesses)?;
        let (_, proof) = match &mut self.prover {
            Prover::Local => virgo_prove(&statement.circuit, &input, &self.identity, &self.proof)?,
            Prover::Cluster(c) => devirgo_prove(c, &statement.circuit, &input, &self.identity, &self.proof)?,
        };
        Ok(RelayEnvelope { parent, headers, committees, identity: self.identity.clone(), proof: proof.to_bytes() })
    }

    /// One round of the relay loop: fetch `batch` headers after the cursor,
    /// skipping any the updater already holds, and prove them.
    pub fn next_envelope(
        &mut self,
        chain: &ChainSim,
        nodes: &[FullNode],
        updater: &Updater,
        batch: usize,
    ) -> std::result::Result<RelayEnvelope, RelayError> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("no full nodes".into()).into());
        }
        loop {
            let (block, _) = majority_next(chain, nodes, &self.cursor).ok_or(RelayError::Retry)?;
            if !updater.dag().contains(&block.digest()) {
                break;
            }
            self.cursor = block.digest();
        }
        let mut blocks = Vec::with_capacity(batch);
        let mut committees = Vec::with_capacity(batch);
        let mut at = self.cursor;
        while blocks.len() < batch {
            let (block, keys) = majority_next(chain, nodes, &at).ok_or(RelayError::Retry)?;
            at = block.digest();
            blocks.push(block);
            committees.push(keys);
        }
        Ok(self.prove(self.cursor, &blocks, committees)?)
    }

    /// Relays and submits; advances the cursor on acceptance.
    pub fn step(
        &mut self,
        chain: &ChainSim,
        nodes: &[FullNode],
        updater: &mut Updater,
        batch: usize,
    ) -> std::result::Result<Outcome, RelayError> {
        let env = self.next_envelope(chain, nodes, updater, batch)?;
        let outcome = updater.apply(&env);
        if outcome.ok() {
            self.cursor = env.tip().digest();
        }
        Ok(outcome)
    }
}

/// One round of round-robin relaying: the relay in slot
/// `next height % relays` submits first, then the others in order until one
/// envelope is accepted. Returns the accepting relay's index, or `None` if
/// every relay had to retry or was rejected.
pub fn round_robin_step(relays: &mut [Relay], chain: &ChainSim, nodes: &[FullNode], updater: &mut Updater) -> Option<usize> {
    let n = relays.len();
    if n == 0 {
        return None;
    }
    let next = updater.dag().best().height + 1;
    let slot = (next % n as u64) as usize;
    (0..n).map(|i| (slot + i) % n).find(|&i| matches!(relays[i].step(chain, nodes, updater, 1), Ok(Outcome::Accepted)))
}

/// Proves `blocks` as one batch and applies it.
pub fn batch_prove_and_update(relay: &mut Relay, updater: &mut Updater, blocks: &[Block], chain: &ChainSim) -> Result<bool> {
    let parent = blocks.first().map(|b| b.header.parent).unwrap_or(relay.cursor);
    let committees = blocks.iter().map(|b| chain.keys_for(b.header.height)).collect();
    let env = relay.prove(parent, blocks, committees)?;
    let ok = updater.header_update(&env);
    if ok {
        relay.cursor = env.tip().digest();
    }
    Ok(ok)
}
