//! Seeded bridge runs described by small `key = value` files.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! blocks = 12
//! adversarial_relays = 2
//! fork_every = 3
//! ```
//!
//! Keys (defaults in parentheses): `seed` (1), `committee_size` (4),
//! `signers` (3), `rotation` (4), `rounds` (8), `blocks` (8),
//! `honest_relays` (1), `adversarial_relays` (0), `full_nodes` (3),
//! `forging_nodes` (0), `fork_every` (0, off), `fork_length` (1),
//! `batch` (1), `confirmations` (2), `quorum` (2/3), `lock_amount` (0, off),
//! `workers` (1), `log_rate` (3), `queries` (16).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use super::app::{LockTx, MintContract, MintError, MintRequest};
use super::chain::{Block, ChainParams, ChainSim};
use super::envelope::RelayEnvelope;
use super::light_client::Quorum;
use super::relay::{FullNode, NodeBehavior, Prover, Relay, RelayError};
use super::updater::{HeaderId, Outcome, Updater, UpdaterConfig};
use crate::devirgo::{Cluster, ProofConfig};
use crate::error::{invalid, Error, Result};
use crate::merkle::Digest;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub seed: u64,
    pub committee_size: usize,
    pub signers: usize,
    pub rotation: u64,
    pub rounds: usize,
    pub blocks: usize,
    pub honest_relays: usize,
    pub adversarial_relays: usize,
    pub full_nodes: usize,
    pub forging_nodes: usize,
    pub fork_every: usize,
    pub fork_length: usize,
    pub batch: usize,
    pub confirmations: usize,
    pub quorum: Quorum,
    pub lock_amount: u64,
    pub workers: usize,
    pub proof: ProofConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            committee_size: 4,
            signers: 3,
            rotation: 4,
            rounds: 8,
            blocks: 8,
            honest_relays: 1,
            adversarial_relays: 0,
            full_nodes: 3,
            forging_nodes: 0,
            fork_every: 0,
            fork_length: 1,
            batch: 1,
            confirmations: 2,
            quorum: Quorum::default(),
            lock_amount: 0,
            workers: 1,
            proof: ProofConfig::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_over(Self::default(), text)
    }

    /// Like [`Scenario::parse`], with unset keys taken from `base`.
    pub fn parse_over(base: Self, text: &str) -> Result<Self> {
        let mut s = base;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return invalid(format!("line {}: expected key = value", lineno + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => s.seed = num(key, value)?,
                "committee_size" => s.committee_size = num(key, value)?,
                "signers" => s.signers = num(key, value)?,
                "rotation" => s.rotation = num(key, value)?,
                "rounds" => s.rounds = num(key, value)?,
                "blocks" => s.blocks = num(key, value)?,
                "honest_relays" => s.honest_relays = num(key, value)?,
                "adversarial_relays" => s.adversarial_relays = num(key, value)?,
                "full_nodes" => s.full_nodes = num(key, value)?,
                "forging_nodes" => s.forging_nodes = num(key, value)?,
                "fork_every" => s.fork_every = num(key, value)?,
                "fork_length" => s.fork_length = num(key, value)?,
                "batch" => s.batch = num(key, value)?,
                "confirmations" => s.confirmations = num(key, value)?,
                "quorum" => {
                    let (n, d) = value
                        .split_once('/')
                        .ok_or_else(|| Error::InvalidArgument(format!("quorum: expected n/d, got {value:?}")))?;
                    s.quorum = Quorum::new(num(key, n.trim())?, num(key, d.trim())?)?;
                }
                "lock_amount" => s.lock_amount = num(key, value)?,
                "workers" => s.workers = num(key, value)?,
                "log_rate" => s.proof.log_rate = num(key, value)?,
                "queries" => s.proof.queries = num(key, value)?,
                _ => return invalid(format!("line {}: unknown key {key:?}", lineno + 1)),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn chain_params(&self) -> ChainParams {
        ChainParams {
            committee_size: self.committee_size,
            signers: self.signers,
            rotation: self.rotation,
            rounds: self.rounds,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.chain_params().validate()?;
        if self.honest_relays == 0 {
            return invalid("at least one honest relay is required");
        }
        if self.full_nodes == 0 || 2 * self.forging_nodes >= self.full_nodes {
            return invalid("forging full nodes must be a strict minority");
        }
        if !self.batch.is_power_of_two() || !self.workers.is_power_of_two() {
            return invalid("batch and workers must be powers of two");
        }
        if self.fork_every > 0 && (self.fork_length == 0 || self.fork_length > self.confirmations) {
            return invalid("forks need 1 <= fork_length <= confirmations");
        }
        if !self.quorum.met(self.signers, self.committee_size) {
            return invalid("honest blocks would not meet the quorum");
        }
        Ok(())
    }
}

/// Junk an adversarial relay can submit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Attack {
    RandomProof,
    ProofBitFlip,
    Splice,
    IdentitySwap,
    TamperedHeader,
    UnknownParent,
    ForgedSignature,
    BelowQuorum,
}

impl Attack {
    pub const ALL: [Attack; 8] = [
        Attack::RandomProof,
        Attack::ProofBitFlip,
        Attack::Splice,
        Attack::IdentitySwap,
        Attack::TamperedHeader,
        Attack::UnknownParent,
        Attack::ForgedSignature,
        Attack::BelowQuorum,
    ];
}

/// Builds a junk envelope of kind `attack` from honest material. `base` is a
/// valid envelope for some header, `other` a valid one for a different header.
pub fn forge(
    attack: Attack,
    base: &RelayEnvelope,
    other: &RelayEnvelope,
    relay: &mut Relay,
    chain: &ChainSim,
    quorum: Quorum,
    rng: &mut ChaCha20Rng,
) -> Result<RelayEnvelope> {
    let mut env = base.clone();
    match attack {
        Attack::RandomProof => {
            let len = base.proof.len();
            env.proof = (0..len).map(|_| rng.gen()).collect();
        }
        Attack::ProofBitFlip => {
            let i = rng.gen_range(0..env.proof.len());
            env.proof[i] ^= 1 << rng.gen_range(0..8);
        }
        Attack::Splice => env.proof = other.proof.clone(),
        Attack::IdentitySwap => env.identity = other.identity.iter().chain(b"'").copied().collect(),
        Attack::TamperedHeader => {
            let h = &mut env.headers[0];
            match rng.gen_range(0..3) {
                0 => h.tx_root.0[rng.gen_range(0..32)] ^= 1,
                1 => h.validator_commitment[rng.gen_range(0..32)] ^= 1,
                _ => h.signatures[0].signature += crate::field::FieldElement::ONE,
            }
        }
        Attack::UnknownParent => {
            env.parent = rng.gen();
            env.headers[0].parent = env.parent;
        }
        Attack::ForgedSignature | Attack::BelowQuorum => {
            let mut blocks: Vec<Block> = base
                .headers
                .iter()
                .map(|h| chain.block(&h.digest()).cloned().ok_or_else(|| Error::InvalidArgument("unknown header".into())))
                .collect::<Result<_>>()?;
            let b = &mut blocks[0];
            let short = quorum.threshold(base.committees[0].len()).saturating_sub(1);
            if attack == Attack::BelowQuorum && short > 0 {
                b.header.signatures.truncate(short);
                b.witnesses.truncate(short);
            } else {
                b.header.signatures[0].signature += crate::field::FieldElement::ONE;
            }
            // The relay can still run the prover; the circuit just will not
            // output all ones.
            env = relay.prove(base.parent, &blocks, base.committees.clone())?;
        }
    }
    Ok(env)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AppOutcome {
    pub locked: u64,
    pub minted: u64,
    pub premature_rejected: bool,
    pub replay_rejected: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub honest_accepted: usize,
    pub honest_rejected: usize,
    pub duplicates: usize,
    pub fork_envelopes: usize,
    pub fork_accepted: usize,
    pub forged_submitted: usize,
    pub forged_accepted: usize,
    pub forged_by_attack: Vec<(Attack, usize)>,
    pub retries: usize,
    /// Steps at which the updater's confirmed main chain was not a prefix
    /// of the sender chain.
    pub consistency_violations: usize,
    /// Canonical blocks the updater could not return at the end.
    pub missing_blocks: usize,
    pub canonical_height: u64,
    pub main_chain: Vec<String>,
    pub app: Option<AppOutcome>,
    pub state_hash: String,
}

impl ScenarioReport {
    /// No safety, consistency, liveness or app failures.
    pub fn passed(&self) -> bool {
        self.forged_accepted == 0
            && self.honest_rejected == 0
            && self.consistency_violations == 0
            && self.missing_blocks == 0
            && self.app.as_ref().map_or(true, |a| a.minted == a.locked && a.premature_rejected && a.replay_rejected)
    }
}

impl std::fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "seed                 {}", self.seed)?;
        writeln!(f, "honest envelopes     {} accepted, {} rejected, {} duplicate", self.honest_accepted, self.honest_rejected, self.duplicates)?;
        writeln!(f, "fork envelopes       {} submitted, {} accepted", self.fork_envelopes, self.fork_accepted)?;
        writeln!(f, "forged envelopes     {} submitted, {} accepted", self.forged_submitted, self.forged_accepted)?;
        for (a, n) in &self.forged_by_attack {
            writeln!(f, "  {a:?}: {n}")?;
        }
        writeln!(f, "relay retries        {}", self.retries)?;
        writeln!(f, "consistency errors   {}", self.consistency_violations)?;
        writeln!(f, "missing blocks       {}", self.missing_blocks)?;
        writeln!(f, "sender height        {}", self.canonical_height)?;
        writeln!(f, "main chain ({} confirmed headers)", self.main_chain.len())?;
        for d in &self.main_chain {
            writeln!(f, "  {d}")?;
        }
        if let Some(a) = &self.app {
            writeln!(
                f,
                "lock-mint            locked {}, minted {}, premature rejected {}, replay rejected {}",
                a.locked, a.minted, a.premature_rejected, a.replay_rejected
            )?;
        }
        writeln!(f, "state hash           {}", self.state_hash)?;
        write!(f, "result               {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub(crate) fn hex(d: &[u8]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

struct Run<'a> {
    s: &'a Scenario,
    chain: ChainSim,
    updater: Updater,
    honest: Vec<Relay>,
    adversaries: Vec<Relay>,
    nodes: Vec<FullNode>,
    rng: ChaCha20Rng,
    report: ScenarioReport,
    /// Forks started at a canonical height, with their current tip and length.
    forks: Vec<(Digest, usize)>,
}

impl Run<'_> {
    fn consistent(&self) -> bool {
        let main = self.updater.main_chain();
        let canonical = self.chain.canonical();
        main.len() <= canonical.len() && main.iter().zip(canonical).all(|(h, d)| h.digest() == *d)
    }

    fn honest_round(&mut self, batch: usize) -> Result<()> {
        let n = self.honest.len();
        loop {
            let next = self.updater.dag().best().height + 1;
            let slot = (next % n as u64) as usize;
            let mut progressed = false;
            for i in (0..n).map(|i| (slot + i) % n) {
                match self.honest[i].step(&self.chain, &self.nodes, &mut self.updater, batch) {
                    Ok(Outcome::Accepted) => {
                        self.report.honest_accepted += 1;
                        progressed = true;
                        break;
                    }
                    Ok(Outcome::Duplicate) => self.report.duplicates += 1,
                    Ok(Outcome::Rejected(r)) => {
                        log::warn!("honest envelope rejected: {r:?}");
                        self.report.honest_rejected += 1;
                    }
                    Err(RelayError::Retry) => self.report.retries += 1,
                    Err(RelayError::Failed(e)) => return Err(e),
                }
            }
            if !progressed {
                return Ok(());
            }
        }
    }

    fn adversary_round(&mut self) -> Result<()> {
        for a in 0..self.adversaries.len() {
            let canonical = self.chain.canonical().to_vec();
            if canonical.len() < 3 {
                return Ok(());
            }
            // Honest material: envelopes for two distinct canonical blocks.
            let i = self.rng.gen_range(1..canonical.len() - 1);
            let b0 = self.chain.block(&canonical[i]).unwrap().clone();
            let b1 = self.chain.block(&canonical[i + 1]).unwrap().clone();
            let relay = &mut self.adversaries[a];
            let base = relay.prove(b0.header.parent, &[b0.clone()], vec![self.chain.keys_for(b0.header.height)])?;
            let other = relay.prove(b1.header.parent, &[b1.clone()], vec![self.chain.keys_for(b1.header.height)])?;
            let attack = *Attack::ALL.choose(&mut self.rng).unwrap();
            let env = forge(attack, &base, &other, relay, &self.chain, self.s.quorum, &mut self.rng)?;
            self.report.forged_submitted += 1;
            match self.updater.apply(&env) {
                Outcome::Rejected(_) => {}
                o => {
                    log::error!("forged envelope ({attack:?}) got {o:?}");
                    self.report.forged_accepted += 1;
                }
            }
            match self.report.forged_by_attack.iter_mut().find(|(k, _)| *k == attack) {
                Some((_, n)) => *n += 1,
                None => self.report.forged_by_attack.push((attack, 1)),
            }
        }
        Ok(())
    }

    /// Validly signed blocks off the canonical chain, relayed by an
    /// adversary. Each fork grows to at most `fork_length` headers.
    fn fork_round(&mut self, step: usize) -> Result<()> {
        if self.s.fork_every == 0 {
            return Ok(());
        }
        if step % self.s.fork_every == 0 {
            let tip = self.updater.dag().best().digest();
            if self.chain.canonical().contains(&tip) {
                self.forks.push((tip, 0));
            }
        }
        let relay = match self.adversaries.first_mut() {
            Some(r) => r,
            None => &mut self.honest[0],
        };
        for (tip, len) in self.forks.iter_mut().filter(|(_, l)| *l < self.s.fork_length) {
            let block = self.chain.produce_fork(tip, vec![b"fork".to_vec()])?.clone();
            let keys = self.chain.keys_for(block.header.height);
            let env = relay.prove(*tip, &[block.clone()], vec![keys])?;
            self.report.fork_envelopes += 1;
            if self.updater.apply(&env) == Outcome::Accepted {
                self.report.fork_accepted += 1;
            }
            *tip = block.digest();
            *len += 1;
        }
        Ok(())
    }
}

impl Scenario {
    pub fn run(&self) -> Result<ScenarioReport> {
        self.validate()?;
        let chain = ChainSim::new(self.chain_params())?;
        let genesis = chain.genesis().digest();
        let config = UpdaterConfig {
            rounds: self.rounds,
            quorum: self.quorum,
            confirmations: self.confirmations,
            proof: self.proof,
        };
        let updater = Updater::new(chain.genesis().header.clone(), config);
        let mut honest = Vec::new();
        for i in 0..self.honest_relays {
            let prover = if self.workers > 1 {
                Prover::Cluster(Cluster::in_process(self.workers)?)
            } else {
                Prover::Local
            };
            honest.push(Relay::new(format!("honest-{i}"), genesis, self.rounds, self.proof, prover));
        }
        let adversaries = (0..self.adversarial_relays)
            .map(|i| Relay::new(format!("adversary-{i}"), genesis, self.rounds, self.proof, Prover::Local))
            .collect();
        let mut nodes = vec![FullNode { behavior: NodeBehavior::Forging }; self.forging_nodes];
        nodes.resize(self.full_nodes, FullNode::HONEST);
        let rng = chain.seeded_rng(0x5ce);
        let mut run = Run {
            s: self,
            chain,
            updater,
            honest,
            adversaries,
            nodes,
            rng,
            report: ScenarioReport { seed: self.seed, ..Default::default() },
            forks: Vec::new(),
        };

        let mut contract = MintContract::default();
        let mut app = None;
        let mut pending_mint = None;
        // Enough extra blocks to confirm the last batch.
        let total = self.blocks + self.confirmations + self.batch;
        for step in 0..total {
            let mut txs: Vec<Vec<u8>> = (0..run.rng.gen_range(0..4)).map(|_| ChainSim::random_tx(&mut run.rng)).collect();
            if step == 0 && self.lock_amount > 0 {
                let lock = LockTx { user: "alice".into(), amount: self.lock_amount, nonce: self.seed };
                txs.push(lock.encode());
            }
            let block = run.chain.produce_block(txs)?.clone();
            if step == 0 && self.lock_amount > 0 {
                let index = block.txs.len() - 1;
                let req = MintRequest { height: block.header.height, tx: block.txs[index].clone(), path: block.tx_path(index)? };
                let premature = contract.mint(&run.updater, &req) == Err(MintError::NotIncluded);
                app = Some(AppOutcome { locked: self.lock_amount, premature_rejected: premature, ..Default::default() });
                pending_mint = Some(req);
            }
            run.adversary_round()?;
            run.fork_round(step)?;
            if step % self.batch == self.batch - 1 {
                run.honest_round(self.batch)?;
            }
            if !run.consistent() {
                run.report.consistency_violations += 1;
            }
            if let (Some(req), Some(a)) = (&pending_mint, app.as_mut()) {
                if a.minted == 0 {
                    if let Ok(r) = contract.mint(&run.updater, req) {
                        a.minted = r.amount;
                        a.replay_rejected = contract.mint(&run.updater, req) == Err(MintError::AlreadyMinted);
                    }
                }
            }
        }
        // Whatever does not fill a batch goes one header at a time.
        run.honest_round(1)?;

        let mut r = run.report;
        r.missing_blocks = run
            .chain
            .canonical()
            .iter()
            .filter(|d| run.updater.get_header(HeaderId::Digest(**d)).is_none())
            .count();
        r.canonical_height = run.chain.tip().header.height;
        r.main_chain = run.updater.main_chain().iter().map(|h| hex(&h.digest())).collect();
        r.forged_by_attack.sort();
        r.app = app;
        let mut h = Sha256::new();
        h.update(run.updater.snapshot());
        r.state_hash = hex(&h.finalize());
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_defaults_and_errors() {
        let s = Scenario::parse("# c\nseed = 9\n\nquorum = 3/4 # trailing\nblocks=3\n").unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.blocks, 3);
        assert_eq!(s.quorum, Quorum::new(3, 4).unwrap());
        assert!(Scenario::parse("sede = 9").is_err());
        assert!(Scenario::parse("seed 9").is_err());
        assert!(Scenario::parse("seed = x").is_err());
        assert!(Scenario::parse("batch = 3").is_err());
        assert!(Scenario::parse("forging_nodes = 2\nfull_nodes = 3").is_err());
        assert!(Scenario::parse("fork_every = 2\nfork_length = 3").is_err());
        assert!(Scenario::parse("signers = 2").is_err());
    }

    #[test]
    fn happy_path_accepts_everything() {
        let s = Scenario { blocks: 6, lock_amount: 5, ..Default::default() };
        let r = s.run().unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.honest_accepted as u64, r.canonical_height - 1);
        assert_eq!(r.app.as_ref().unwrap().minted, 5);
        assert_eq!(s.run().unwrap(), r);
    }

    #[test]
    fn adversarial_run_rejects_forgeries() {
        let s = Scenario {
            seed: 4,
            blocks: 10,
            adversarial_relays: 3,
            forging_nodes: 1,
            fork_every: 3,
            fork_length: 2,
            ..Default::default()
        };
        let r = s.run().unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.forged_submitted > 0 && r.fork_accepted > 0);
    }

    #[test]
    fn batched_and_distributed_runs() {
        let s = Scenario { blocks: 8, batch: 4, workers: 2, ..Default::default() };
        let r = s.run().unwrap();
        assert!(r.passed(), "{r}");
        assert!(r.honest_accepted >= 2);
    }
}
