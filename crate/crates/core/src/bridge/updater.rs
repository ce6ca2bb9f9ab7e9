//! The receiving chain's updater contract: a DAG of proven headers and the
//! light-client state of its heaviest branch.

use std::collections::{BTreeMap, HashMap};

use super::chain::BlockHeader;
use super::envelope::RelayEnvelope;
use super::light_client::{check_header_public, HeaderStatement, LightClientState, Quorum};
use crate::codec::{Reader, Writer};
use crate::devirgo::{devirgo_verify, DeVirgoProof, ProofConfig};
use crate::error::{invalid, Error, Result};
use crate::merkle::{mt_commit, mt_verify, Digest, MerklePath, MerkleRoot};

const SNAPSHOT_MAGIC: &[u8; 4] = b"ZKBU";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
struct Node {
    header: BlockHeader,
    weight: u64,
}

/// Headers reachable from a fixed genesis. Every header weighs 1, so a
/// node's cumulative weight is its distance from genesis plus one.
#[derive(Clone, Debug)]
pub struct HeaderDag {
    nodes: HashMap<Digest, Node>,
    /// Insertion order, for snapshots.
    order: Vec<Digest>,
    genesis: Digest,
    best: Digest,
    /// Digests along the path to `best`, starting at genesis.
    main: Vec<Digest>,
    /// Batch roots keyed by the height of the batch's first header.
    batch_roots: BTreeMap<u64, MerkleRoot>,
}

impl HeaderDag {
    pub fn new(genesis: BlockHeader) -> Self {
        let d = genesis.digest();
        let mut nodes = HashMap::new();
        nodes.insert(d, Node { header: genesis, weight: 1 });
        Self { nodes, order: vec![d], genesis: d, best: d, main: vec![d], batch_roots: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.nodes.contains_key(digest)
    }

    pub fn header(&self, digest: &Digest) -> Option<&BlockHeader> {
        self.nodes.get(digest).map(|n| &n.header)
    }

    pub fn weight(&self, digest: &Digest) -> Option<u64> {
        self.nodes.get(digest).map(|n| n.weight)
    }

    pub fn genesis(&self) -> &BlockHeader {
        &self.nodes[&self.genesis].header
    }

    /// The heaviest header; ties go to the smaller digest.
    pub fn best(&self) -> &BlockHeader {
        &self.nodes[&self.best].header
    }

    pub fn batch_roots(&self) -> &BTreeMap<u64, MerkleRoot> {
        &self.batch_roots
    }

    /// Adds a header whose parent is present. No validity checks beyond
    /// that. Returns the number of main-chain entries rewritten.
    pub fn insert(&mut self, header: BlockHeader) -> Result<usize> {
        let d = header.digest();
        if self.nodes.contains_key(&d) {
            return Ok(0);
        }
        let Some(parent) = self.nodes.get(&header.parent) else {
            return invalid("parent not in the DAG");
        };
        let weight = parent.weight + 1;
        self.nodes.insert(d, Node { header, weight });
        self.order.push(d);
        let best = &self.nodes[&self.best];
        if weight > best.weight || (weight == best.weight && d < self.best) {
            self.best = d;
            return Ok(self.reindex_main());
        }
        Ok(0)
    }

    /// Rewrites `main` from the new best tip back to the common ancestor.
    fn reindex_main(&mut self) -> usize {
        let len = self.nodes[&self.best].weight as usize;
        self.main.resize(len, [0; 32]);
        let mut d = self.best;
        let mut i = len;
        let mut steps = 0;
        while i > 0 {
            i -= 1;
            if self.main[i] == d {
                break;
            }
            self.main[i] = d;
            steps += 1;
            d = self.nodes[&d].header.parent;
        }
        steps
    }

    pub fn on_main_chain(&self, digest: &Digest) -> bool {
        self.nodes
            .get(digest)
            .is_some_and(|n| self.main.get(n.weight as usize - 1) == Some(digest))
    }

    /// The heaviest path from genesis, minus its last `confirmations`
    /// headers.
    pub fn main_chain(&self, confirmations: usize) -> Vec<&BlockHeader> {
        let keep = self.main.len().saturating_sub(confirmations);
        self.main[..keep].iter().map(|d| &self.nodes[d].header).collect()
    }

    /// Main-chain header at `height`.
    pub fn at_height(&self, height: u64) -> Option<&BlockHeader> {
        let g = self.genesis().height;
        let i = usize::try_from(height.checked_sub(g)?).ok()?;
        self.main.get(i).map(|d| &self.nodes[d].header)
    }

    /// Every path from genesis to a leaf.
    pub fn leaf_paths(&self) -> Vec<Vec<Digest>> {
        let mut children: HashMap<Digest, Vec<Digest>> = HashMap::new();
        for d in &self.order[1..] {
            children.entry(self.nodes[d].header.parent).or_default().push(*d);
        }
        let mut out = Vec::new();
        let mut stack = vec![vec![self.genesis]];
        while let Some(path) = stack.pop() {
            match children.get(path.last().unwrap()) {
                None => out.push(path),
                Some(kids) => {
                    for k in kids {
                        let mut p = path.clone();
                        p.push(*k);
                        stack.push(p);
                    }
                }
            }
        }
        out
    }
}

/// Free-function form of [`HeaderDag::main_chain`].
pub fn main_chain(dag: &HeaderDag, confirmations: usize) -> Vec<BlockHeader> {
    dag.main_chain(confirmations).into_iter().cloned().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdaterConfig {
    pub rounds: usize,
    pub quorum: Quorum,
    /// Headers this deep or deeper count as confirmed.
    pub confirmations: usize,
    pub proof: ProofConfig,
}

impl Default for UpdaterConfig {
    fn default() -> Self {
        Self { rounds: 8, quorum: Quorum::default(), confirmations: 2, proof: ProofConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    UnknownParent,
    /// Empty batch, batch size not a power of two, or mismatched committee list.
    Malformed,
    /// Parent link, height, committee commitment or quorum check failed.
    HeaderCheck,
    BadProof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    /// Every header was already present.
    Duplicate,
    Rejected(Rejection),
}

impl Outcome {
    pub fn ok(self) -> bool {
        !matches!(self, Outcome::Rejected(_))
    }
}

/// Work done by the updater, for checking that each update costs the same
/// regardless of how many headers are stored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub envelopes: u64,
    pub proof_checks: u64,
    pub dag_reads: u64,
    pub dag_writes: u64,
    /// Main-chain index entries rewritten after a tip change.
    pub reorg_steps: u64,
}

/// A header lookup result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeaderView {
    pub header: BlockHeader,
    /// State of the updater's heaviest branch.
    pub lcs: LightClientState,
    pub on_main_chain: bool,
    /// On the main chain at least `confirmations` headers below the tip.
    pub confirmed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeaderId {
    Height(u64),
    Digest(Digest),
}

#[derive(Clone, Debug)]
pub struct Updater {
    config: UpdaterConfig,
    dag: HeaderDag,
    counters: OpCounters,
}

impl Updater {
    pub fn new(genesis: BlockHeader, config: UpdaterConfig) -> Self {
        Self { config, dag: HeaderDag::new(genesis), counters: OpCounters::default() }
    }

    pub fn config(&self) -> &UpdaterConfig {
        &self.config
    }

    pub fn dag(&self) -> &HeaderDag {
        &self.dag
    }

    pub fn counters(&self) -> OpCounters {
        self.counters
    }

    /// Light-client state of the heaviest branch.
    pub fn lcs(&self) -> LightClientState {
        LightClientState::after(self.dag.best(), self.config.quorum)
    }

    pub fn header_update(&mut self, env: &RelayEnvelope) -> bool {
        self.apply(env).ok()
    }

    /// Checks and applies one envelope; nothing is inserted unless every
    /// header in it passes.
    pub fn apply(&mut self, env: &RelayEnvelope) -> Outcome {
        self.counters.envelopes += 1;
        let outcome = self.check(env);
        if outcome == Outcome::Accepted {
            for h in &env.headers {
                self.counters.dag_writes += 1;
                let steps = self.dag.insert(h.clone()).expect("checked linkage");
                self.counters.reorg_steps += steps as u64;
            }
            if env.headers.len() > 1 {
                let digests: Vec<Digest> = env.headers.iter().map(BlockHeader::digest).collect();
                let root = mt_commit(&digests).expect("non-empty batch");
                self.dag.batch_roots.insert(env.headers[0].height, root);
            }
        }
        if let Outcome::Rejected(r) = outcome {
            log::debug!("rejected envelope from {:?}: {r:?}", String::from_utf8_lossy(&env.identity));
        }
        outcome
    }

    fn check(&mut self, env: &RelayEnvelope) -> Outcome {
        self.counters.dag_reads += 1;
        let Some(parent) = self.dag.header(&env.parent).cloned() else {
            return Outcome::Rejected(Rejection::UnknownParent);
        };
        let n = env.headers.len();
        if n == 0 || !n.is_power_of_two() || env.committees.len() != n {
            return Outcome::Rejected(Rejection::Malformed);
        }
        let mut prev = &parent;
        for (h, keys) in env.headers.iter().zip(&env.committees) {
            let lcs = LightClientState::after(prev, self.config.quorum);
            if !check_header_public(&lcs, prev, h, keys) {
                return Outcome::Rejected(Rejection::HeaderCheck);
            }
            prev = h;
        }
        if !self.verify_proof(env) {
            return Outcome::Rejected(Rejection::BadProof);
        }
        self.counters.dag_reads += n as u64;
        if env.headers.iter().all(|h| self.dag.contains(&h.digest())) {
            return Outcome::Duplicate;
        }
        Outcome::Accepted
    }

    fn verify_proof(&mut self, env: &RelayEnvelope) -> bool {
        self.counters.proof_checks += 1;
        let Ok(statement) = HeaderStatement::new(&env.headers, &env.committees, self.config.rounds) else {
            return false;
        };
        let Ok(proof) = DeVirgoProof::from_bytes(&env.proof) else {
            return false;
        };
        devirgo_verify(
            &statement.circuit,
            &statement.public,
            &statement.expected_outputs(),
            &proof,
            &env.identity,
            &self.config.proof,
        )
    }

    /// `None` means the header is unknown: the caller should wait.
    pub fn get_header(&self, id: HeaderId) -> Option<HeaderView> {
        let header = match id {
            HeaderId::Height(h) => self.dag.at_height(h)?,
            HeaderId::Digest(d) => self.dag.header(&d)?,
        };
        let on_main_chain = self.dag.on_main_chain(&header.digest());
        let tip = self.dag.best().height;
        Some(HeaderView {
            header: header.clone(),
            lcs: self.lcs(),
            on_main_chain,
            confirmed: on_main_chain && header.height + self.config.confirmations as u64 <= tip,
        })
    }

    pub fn main_chain(&self) -> Vec<BlockHeader> {
        main_chain(&self.dag, self.config.confirmations)
    }

    /// True iff `tx` is in a confirmed main-chain header under `path`.
    pub fn verify_tx_inclusion(&self, id: HeaderId, tx: &[u8], path: &MerklePath) -> bool {
        self.get_header(id)
            .is_some_and(|v| v.confirmed && mt_verify(path, tx, &v.header.tx_root))
    }

    /// Versioned binary dump. Counters are not part of the state.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(SNAPSHOT_MAGIC).u32(SNAPSHOT_VERSION);
        let c = &self.config;
        w.u32(c.rounds as u32).u32(c.quorum.num).u32(c.quorum.den).u32(c.confirmations as u32);
        w.u32(c.proof.log_rate as u32).u32(c.proof.queries as u32);
        w.u32(self.dag.order.len() as u32);
        for d in &self.dag.order {
            self.dag.nodes[d].header.write(&mut w);
        }
        w.u32(self.dag.batch_roots.len() as u32);
        for (h, root) in &self.dag.batch_roots {
            w.u64(*h).digest(&root.0);
        }
        w.finish()
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.bytes(4)? != SNAPSHOT_MAGIC {
            return Err(Error::Decode("not an updater snapshot".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Decode(format!("snapshot version {version}")));
        }
        let rounds = r.u32()? as usize;
        let quorum = Quorum::new(r.u32()?, r.u32()?)?;
        let confirmations = r.u32()? as usize;
        let proof = ProofConfig { log_rate: r.u32()? as usize, queries: r.u32()? as usize };
        let n = r.u32()? as usize;
        if n == 0 {
            return Err(Error::Decode("snapshot without genesis".into()));
        }
        let mut dag = HeaderDag::new(BlockHeader::read(&mut r)?);
        for _ in 1..n {
            let h = BlockHeader::read(&mut r)?;
            if dag.contains(&h.digest()) {
                return Err(Error::Decode("repeated header".into()));
            }
            dag.insert(h).map_err(|e| Error::Decode(e.to_string()))?;
        }
        for _ in 0..r.u32()? {
            let h = r.u64()?;
            dag.batch_roots.insert(h, MerkleRoot(r.digest()?));
        }
        r.finish()?;
        let config = UpdaterConfig { rounds, quorum, confirmations, proof };
        Ok(Self { config, dag, counters: OpCounters::default() })
    }
}
