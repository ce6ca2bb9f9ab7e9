//! The coordinator side: a star of links to workers that the GKR, sumcheck
//! and commitment drivers steer as a single backend.
//!
//! Worker `j` holds the contiguous block of copies
//! `j * copies / workers ..`. Challenges are drawn only at the coordinator.
//! Every message that starts or advances a sumcheck is answered by each worker
//! with its round polynomial (or its folded values once its local variables
//! are bound), so a round costs one broadcast plus one frame per worker.
//!
//! Columns of `L` are owned round-robin (worker `j` owns `j, j + workers, ..`).
//! Workers exchange column slices through the coordinator, and each owner
//! hashes its full bundles.

use std::thread::JoinHandle;
use std::time::Duration;

use sha2::{Digest as _, Sha256};

use super::message::{ColumnKind, Message};
use super::transport::{channel_pair, Frame, Link, TcpLink};
use super::worker::Worker;
use super::PROTOCOL_VERSION;
use crate::circuit::{write_circuit, CircuitShape, DataParallelCircuit};
use crate::error::{invalid, Error, Result};
use crate::field::FieldElement;
use crate::iop::gkr::{GkrBackend, WeightTerms};
use crate::iop::sumcheck::prove_with_backend;
use crate::iop::{ProductSum, SumcheckBackend, SumcheckProof, Transcript};
use crate::merkle::{Digest, MerkleRoot, MerkleTree};
use crate::pc::{ColumnOpening, Combiner, PcBackend, PcCommitment, PcParams};

/// Parameters every member of a cluster must agree on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterConfig {
    pub workers: usize,
    pub log_rate: usize,
    pub queries: usize,
}

impl ClusterConfig {
    pub fn hash(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(b"zkbridge/cluster");
        h.update(PROTOCOL_VERSION.to_le_bytes());
        for v in [self.workers, self.log_rate, self.queries] {
            h.update((v as u64).to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Traffic seen at the coordinator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommStats {
    pub frames_sent: u64,
    pub frames_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Messages sent to every worker at once (each also counts one frame per
    /// worker in `frames_sent`).
    pub broadcasts: u64,
    /// Round polynomials received from workers.
    pub round_messages: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub gate_evals: u64,
    pub busy: Duration,
}

struct PcLayout {
    params: PcParams,
    copies: usize,
    f_tree: MerkleTree,
    h_tree: Option<MerkleTree>,
}

pub struct Cluster {
    links: Vec<Box<dyn Link>>,
    threads: Vec<JoinHandle<Result<()>>>,
    stats: CommStats,
    pending: Vec<Message>,
    gate_evals: Vec<u64>,
    copies: usize,
    pc: Option<PcLayout>,
}

fn check_workers(workers: usize) -> Result<()> {
    if workers == 0 || !workers.is_power_of_two() {
        return invalid(format!("worker count {workers} is not a power of two"));
    }
    Ok(())
}

impl Cluster {
    /// Spawns `workers` worker threads connected by in-process channels.
    pub fn in_process(workers: usize) -> Result<Self> {
        check_workers(workers)?;
        let mut links: Vec<Box<dyn Link>> = Vec::with_capacity(workers);
        let mut threads = Vec::with_capacity(workers);
        for i in 0..workers {
            let (ours, mut theirs) = channel_pair();
            links.push(Box::new(ours));
            let handle = std::thread::Builder::new()
                .name(format!("worker-{i}"))
                .spawn(move || Worker::new(None).run(&mut theirs))?;
            threads.push(handle);
        }
        Self::from_links(links, threads, None)
    }

    /// Connects to workers listening at `addrs` and checks that they run the
    /// same configuration.
    pub fn connect(addrs: &[String], config: &ClusterConfig) -> Result<Self> {
        check_workers(addrs.len())?;
        if config.workers != addrs.len() {
            return invalid(format!("{} endpoints for {} workers", addrs.len(), config.workers));
        }
        let links = addrs
            .iter()
            .map(|a| TcpLink::connect(a).map(|l| Box::new(l) as Box<dyn Link>))
            .collect::<Result<_>>()?;
        Self::from_links(links, Vec::new(), Some(config.hash()))
    }

    /// Wraps already connected links and performs the handshake.
    pub fn from_links(links: Vec<Box<dyn Link>>, threads: Vec<JoinHandle<Result<()>>>, hash: Option<Digest>) -> Result<Self> {
        check_workers(links.len())?;
        let mut c = Self {
            links,
            threads,
            stats: CommStats::default(),
            pending: Vec::new(),
            gate_evals: Vec::new(),
            copies: 0,
            pc: None,
        };
        let config_hash = hash.unwrap_or([0; 32]);
        c.broadcast(&Message::Hello { version: PROTOCOL_VERSION, config_hash })?;
        for (i, m) in c.gather()?.into_iter().enumerate() {
            match m {
                Message::HelloAck { version, config_hash: theirs }
                    if version == PROTOCOL_VERSION && (hash.is_none() || theirs == config_hash) => {}
                _ => return Err(Error::Protocol { worker: i, reason: "handshake failed".into() }),
            }
        }
        Ok(c)
    }

    pub fn workers(&self) -> usize {
        self.links.len()
    }

    /// Gate evaluations reported by each worker at the last setup.
    pub fn setup_gate_evals(&self) -> &[u64] {
        &self.gate_evals
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = CommStats::default();
    }

    fn send_frame(&mut self, i: usize, frame: Frame) -> Result<()> {
        self.stats.frames_sent += 1;
        self.stats.bytes_sent += frame.wire_len() as u64;
        self.links[i].send(frame).map_err(|e| Error::Protocol { worker: i, reason: e.to_string() })
    }

    pub fn send(&mut self, i: usize, msg: &Message) -> Result<()> {
        self.send_frame(i, msg.to_frame())
    }

    pub fn recv(&mut self, i: usize) -> Result<Message> {
        let frame = self.links[i].recv().map_err(|e| Error::Protocol { worker: i, reason: e.to_string() })?;
        self.stats.frames_received += 1;
        self.stats.bytes_received += frame.wire_len() as u64;
        match Message::from_frame(&frame) {
            Ok(Message::Error(reason)) => Err(Error::Protocol { worker: i, reason }),
            Ok(Message::RoundEvals(e)) => {
                self.stats.round_messages += 1;
                Ok(Message::RoundEvals(e))
            }
            Ok(m) => Ok(m),
            Err(e) => Err(Error::Protocol { worker: i, reason: format!("malformed frame: {e}") }),
        }
    }

    pub fn broadcast(&mut self, msg: &Message) -> Result<()> {
        self.stats.broadcasts += 1;
        let frame = msg.to_frame();
        for i in 0..self.workers() {
            self.send_frame(i, frame.clone())?;
        }
        Ok(())
    }

    /// One reply from every worker, in worker order.
    pub fn gather(&mut self) -> Result<Vec<Message>> {
        (0..self.workers()).map(|i| self.recv(i)).collect()
    }

    fn gather_pending(&mut self) -> Result<()> {
        self.pending = self.gather()?;
        Ok(())
    }

    /// Hands each worker its block of copies of `circuit` and their inputs.
    /// Returns the global output layer.
    pub fn setup(&mut self, circuit: &DataParallelCircuit, input: &[FieldElement]) -> Result<Vec<FieldElement>> {
        let workers = self.workers();
        let copies = circuit.copies();
        if copies % workers != 0 {
            return invalid(format!("{copies} copies cannot be split over {workers} workers"));
        }
        if input.len() != circuit.input_size() {
            return invalid(format!("expected {} inputs, got {}", circuit.input_size(), input.len()));
        }
        let per = copies / workers;
        let chunk = per * circuit.sub().input_size();
        let text = write_circuit(circuit.sub(), 1);
        for (i, block) in input.chunks(chunk).enumerate() {
            self.send(
                i,
                &Message::Setup {
                    worker: i as u32,
                    workers: workers as u32,
                    circuit: text.clone(),
                    first_copy: (i * per) as u64,
                    log_copies: per.trailing_zeros(),
                    input: block.to_vec(),
                },
            )?;
        }
        let mut outputs = Vec::with_capacity(copies << circuit.sub().layer_log_size(0));
        self.gate_evals.clear();
        for (i, m) in self.gather()?.into_iter().enumerate() {
            match m {
                Message::Ready { gate_evals, outputs: o } => {
                    self.gate_evals.push(gate_evals);
                    outputs.extend(o);
                }
                _ => return Err(Error::Protocol { worker: i, reason: "expected Ready".into() }),
            }
        }
        self.copies = copies;
        self.pc = None;
        Ok(outputs)
    }

    pub fn worker_stats(&mut self) -> Result<Vec<WorkerStats>> {
        self.broadcast(&Message::StatsRequest)?;
        self.gather()?
            .into_iter()
            .enumerate()
            .map(|(i, m)| match m {
                Message::Stats { gate_evals, busy_micros } => {
                    Ok(WorkerStats { gate_evals, busy: Duration::from_micros(busy_micros) })
                }
                _ => Err(Error::Protocol { worker: i, reason: "expected Stats".into() }),
            })
            .collect()
    }

    /// Replaces the tables the workers commit to; `tables[i]` goes to the
    /// worker holding copy `i`.
    pub fn load_tables(&mut self, tables: Vec<Vec<FieldElement>>) -> Result<()> {
        let workers = self.workers();
        if tables.is_empty() || tables.len() % workers != 0 {
            return invalid(format!("{} tables cannot be split over {workers} workers", tables.len()));
        }
        let per = tables.len() / workers;
        for (i, block) in tables.chunks(per).enumerate() {
            self.send(i, &Message::PcLoad { worker: i as u32, workers: workers as u32, tables: block.to_vec() })?;
        }
        self.copies = tables.len();
        self.pc = None;
        Ok(())
    }

    /// Relays column slices between workers and assembles the owners' column
    /// hashes into a tree.
    fn exchange_columns(&mut self, kind: ColumnKind, len: usize) -> Result<MerkleTree> {
        let workers = self.workers();
        let mut by_source = Vec::with_capacity(workers);
        for (i, m) in self.gather()?.into_iter().enumerate() {
            match m {
                Message::Slices { kind: k, slices } if k == kind && slices.len() == workers => by_source.push(slices),
                _ => return Err(Error::Protocol { worker: i, reason: "expected column slices".into() }),
            }
        }
        for owner in 0..workers {
            let slices = by_source.iter_mut().map(|s| std::mem::take(&mut s[owner])).collect();
            self.send(owner, &Message::Deliver { kind, slices })?;
        }
        let mut hashes = vec![[0u8; 32]; len];
        for (owner, m) in self.gather()?.into_iter().enumerate() {
            match m {
                Message::ColumnHashes { kind: k, hashes: h } if k == kind && h.len() == len / workers => {
                    for (j, d) in h.into_iter().enumerate() {
                        hashes[owner + j * workers] = d;
                    }
                }
                _ => return Err(Error::Protocol { worker: owner, reason: "expected column hashes".into() }),
            }
        }
        MerkleTree::from_leaf_hashes(hashes)
    }

    /// Commits to the loaded tables (by default the witness halves of the
    /// copies assigned by [`Cluster::setup`]).
    pub fn pc_commit(&mut self, params: &PcParams) -> Result<PcCommitment> {
        params.validate()?;
        let len = params.l_domain().order;
        if len % self.workers() != 0 {
            return invalid("evaluation domain smaller than the cluster");
        }
        if self.copies == 0 {
            return invalid("nothing loaded");
        }
        self.broadcast(&Message::PcCommit(*params))?;
        let f_tree = self.exchange_columns(ColumnKind::Values, len)?;
        let root = f_tree.root();
        self.pc = Some(PcLayout { params: *params, copies: self.copies, f_tree, h_tree: None });
        Ok(PcCommitment { root })
    }

    fn layout(&mut self) -> Result<&mut PcLayout> {
        self.pc.as_mut().ok_or_else(|| Error::InvalidArgument("nothing committed".into()))
    }

    fn expect_round_evals(&self) -> Result<[FieldElement; 3]> {
        let mut s = [FieldElement::ZERO; 3];
        for (i, m) in self.pending.iter().enumerate() {
            match m {
                Message::RoundEvals(e) => {
                    for (acc, v) in s.iter_mut().zip(e) {
                        *acc += *v;
                    }
                }
                _ => return Err(Error::Protocol { worker: i, reason: "expected a round polynomial".into() }),
            }
        }
        Ok(s)
    }

    fn shutdown(&mut self) {
        for link in &mut self.links {
            let _ = link.send(Message::Shutdown.to_frame());
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for Cluster {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl SumcheckBackend for Cluster {
    fn round_evals(&mut self) -> Result<[FieldElement; 3]> {
        self.expect_round_evals()
    }

    fn bind(&mut self, r: FieldElement) -> Result<()> {
        self.broadcast(&Message::Bind(r))?;
        self.gather_pending()
    }

    fn folded(&mut self) -> Result<Vec<[FieldElement; 3]>> {
        self.pending
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                Message::Folded(f) => Ok(*f),
                _ => Err(Error::Protocol { worker: i, reason: "expected folded values".into() }),
            })
            .collect()
    }
}

impl GkrBackend for Cluster {
    fn begin_phase1(&mut self, layer: usize, terms: &WeightTerms) -> Result<()> {
        self.broadcast(&Message::BeginPhase1 { layer: layer as u32, terms: terms.clone() })?;
        self.gather_pending()
    }

    fn begin_phase2(&mut self, layer: usize, u: &[FieldElement], v_u: FieldElement) -> Result<()> {
        self.broadcast(&Message::BeginPhase2 { layer: layer as u32, u: u.to_vec(), v_u })?;
        self.gather_pending()
    }
}

impl PcBackend for Cluster {
    fn copies(&self) -> usize {
        self.pc.as_ref().map_or(self.copies, |p| p.copies)
    }

    fn evaluate(&mut self, points: &[Vec<FieldElement>]) -> Result<Vec<Vec<FieldElement>>> {
        self.broadcast(&Message::PcEvaluate(points.to_vec()))?;
        let mut evals = vec![Vec::new(); points.len()];
        for (i, m) in self.gather()?.into_iter().enumerate() {
            match m {
                Message::Evals(e) if e.len() == points.len() => {
                    for (dst, src) in evals.iter_mut().zip(e) {
                        dst.extend(src);
                    }
                }
                _ => return Err(Error::Protocol { worker: i, reason: "expected evaluations".into() }),
            }
        }
        Ok(evals)
    }

    fn commit_quotients(&mut self, points: &[Vec<FieldElement>], mu: FieldElement) -> Result<MerkleRoot> {
        let len = self.layout()?.params.l_domain().order;
        self.broadcast(&Message::PcQuotients { points: points.to_vec(), mu })?;
        let tree = self.exchange_columns(ColumnKind::Quotients, len)?;
        let root = tree.root();
        self.layout()?.h_tree = Some(tree);
        Ok(root)
    }

    fn combined_codeword(&mut self, comb: &Combiner, claims: &[FieldElement]) -> Result<Vec<FieldElement>> {
        let len = self.layout()?.params.l_domain().order;
        let workers = self.workers();
        self.broadcast(&Message::PcCombine { beta: comb.beta, gamma: comb.gamma, claims: claims.to_vec() })?;
        let mut out = vec![FieldElement::ZERO; len];
        for (owner, m) in self.gather()?.into_iter().enumerate() {
            match m {
                Message::Combined(v) if v.len() == len / workers => {
                    for (j, x) in v.into_iter().enumerate() {
                        out[owner + j * workers] = x;
                    }
                }
                _ => return Err(Error::Protocol { worker: owner, reason: "expected combined values".into() }),
            }
        }
        Ok(out)
    }

    fn open_columns(&mut self, k: usize) -> Result<(ColumnOpening, ColumnOpening)> {
        let owner = k % self.workers();
        self.send(owner, &Message::PcOpen(k as u64))?;
        let (f, h) = match self.recv(owner)? {
            Message::Column { f, h } => (f, h),
            _ => return Err(Error::Protocol { worker: owner, reason: "expected a column".into() }),
        };
        let layout = self.layout()?;
        let h_tree = layout.h_tree.as_ref().ok_or_else(|| Error::InvalidArgument("quotients not committed".into()))?;
        Ok((
            ColumnOpening { values: f, path: layout.f_tree.path(k)? },
            ColumnOpening { values: h, path: h_tree.path(k)? },
        ))
    }
}

/// Sumcheck over `sum_i sum_b f_i(b)` where worker `i` holds `f_i`, the
/// restriction of the global `f` to the copy bits equal to `i`.
pub fn dist_sumcheck(cluster: &mut Cluster, tables: Vec<ProductSum>, t: &mut Transcript) -> Result<SumcheckProof> {
    if tables.len() != cluster.workers() {
        return invalid(format!("{} tables for {} workers", tables.len(), cluster.workers()));
    }
    let vars = tables[0].num_vars();
    if tables.iter().any(|p| p.num_vars() != vars) {
        return invalid("workers must hold tables of equal size");
    }
    for (i, p) in tables.into_iter().enumerate() {
        cluster.send(i, &Message::LoadSumcheck(p))?;
    }
    cluster.gather_pending()?;
    prove_with_backend(cluster, vars, t)
}

/// Commits to `tables` spread over the cluster (copy `i` to the worker that
/// owns it).
pub fn dist_pc_commit(cluster: &mut Cluster, tables: Vec<Vec<FieldElement>>, params: &PcParams) -> Result<PcCommitment> {
    cluster.load_tables(tables)?;
    cluster.pc_commit(params)
}
