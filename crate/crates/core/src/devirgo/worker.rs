//! The worker side: a message-driven state machine holding one block of
//! copies.

use std::net::TcpListener;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::message::{ColumnKind, Message};
use super::transport::{Link, TcpLink};
use super::PROTOCOL_VERSION;
use crate::circuit::{parse_circuit, DataParallelCircuit};
use crate::error::{invalid, Error, Result};
use crate::field::{fft_evaluate, mle::fold_evaluate, FieldElement};
use crate::iop::gkr::{CopyBlock, GkrBackend, LocalGkr};
use crate::iop::{ProductSum, SumcheckBackend};
use crate::merkle::{hash_leaf, Digest};
use crate::pc::{
    column_bytes, combine_column, encode, position_contexts, quotient, weight_coefficients, Combiner, PcParams,
};

enum Active {
    Idle,
    Plain(ProductSum),
    Gkr,
}

#[derive(Default)]
struct PcState {
    tables: Vec<Vec<FieldElement>>,
    params: Option<PcParams>,
    coeffs: Vec<Vec<FieldElement>>,
    codewords: Vec<Vec<FieldElement>>,
    w_coeffs: Vec<FieldElement>,
    quotients: Vec<Vec<FieldElement>>,
    /// Full bundles (every copy) of the columns this worker owns.
    owned_f: Vec<Vec<FieldElement>>,
    owned_h: Vec<Vec<FieldElement>>,
}

pub struct Worker {
    expected_hash: Option<Digest>,
    index: usize,
    workers: usize,
    gkr: Option<LocalGkr>,
    active: Active,
    pc: PcState,
    gate_evals: u64,
    busy: Duration,
}

impl Worker {
    /// `expected_hash`, if set, must match the coordinator's configuration.
    pub fn new(expected_hash: Option<Digest>) -> Self {
        Self {
            expected_hash,
            index: 0,
            workers: 1,
            gkr: None,
            active: Active::Idle,
            pc: PcState::default(),
            gate_evals: 0,
            busy: Duration::ZERO,
        }
    }

    /// Serves `link` until the coordinator shuts it down or hangs up.
    pub fn run(mut self, link: &mut dyn Link) -> Result<()> {
        loop {
            let frame = link.recv()?;
            let msg = match Message::from_frame(&frame) {
                Ok(m) => m,
                Err(e) => {
                    link.send(Message::Error(e.to_string()).to_frame())?;
                    continue;
                }
            };
            if msg == Message::Shutdown {
                return Ok(());
            }
            let start = Instant::now();
            let reply = self.handle(msg).unwrap_or_else(|e| Some(Message::Error(e.to_string())));
            self.busy += start.elapsed();
            if let Some(reply) = reply {
                link.send(reply.to_frame())?;
            }
        }
    }

    fn handle(&mut self, msg: Message) -> Result<Option<Message>> {
        let reply = match msg {
            Message::Hello { version, config_hash } => {
                if version != PROTOCOL_VERSION {
                    return invalid(format!("protocol version {version}, expected {PROTOCOL_VERSION}"));
                }
                if self.expected_hash.is_some_and(|h| h != config_hash) {
                    return invalid("cluster configuration mismatch");
                }
                Message::HelloAck { version, config_hash: self.expected_hash.unwrap_or(config_hash) }
            }
            Message::Setup { worker, workers, circuit, first_copy, log_copies, input } => {
                self.setup(worker as usize, workers as usize, &circuit, first_copy as usize, log_copies as usize, &input)?
            }
            Message::LoadSumcheck(p) => {
                self.active = Active::Plain(p);
                self.round_reply()?
            }
            Message::BeginPhase1 { layer, terms } => {
                self.gkr_mut()?.begin_phase1(layer as usize, &terms)?;
                self.active = Active::Gkr;
                self.round_reply()?
            }
            Message::BeginPhase2 { layer, u, v_u } => {
                self.gkr_mut()?.begin_phase2(layer as usize, &u, v_u)?;
                self.active = Active::Gkr;
                self.round_reply()?
            }
            Message::Bind(r) => {
                match &mut self.active {
                    Active::Idle => return invalid("no sumcheck in progress"),
                    Active::Plain(p) => p.bind(r),
                    Active::Gkr => self.gkr_mut()?.bind(r)?,
                }
                self.round_reply()?
            }
            Message::PcLoad { worker, workers, tables } => {
                if workers == 0 || worker >= workers {
                    return invalid(format!("worker index {worker} of {workers}"));
                }
                self.index = worker as usize;
                self.workers = workers as usize;
                self.pc = PcState { tables, ..PcState::default() };
                return Ok(None);
            }
            Message::PcCommit(params) => self.pc_commit(params)?,
            Message::PcEvaluate(points) => Message::Evals(
                points
                    .iter()
                    .map(|p| self.pc.tables.iter().map(|t| fold_evaluate(t, p)).collect())
                    .collect(),
            ),
            Message::PcQuotients { points, mu } => self.pc_quotients(&points, mu)?,
            Message::Deliver { kind, slices } => self.receive_columns(kind, &slices)?,
            Message::PcCombine { beta, gamma, claims } => self.pc_combine(Combiner { beta, gamma }, &claims)?,
            Message::PcOpen(k) => {
                let k = k as usize;
                if k % self.workers != self.index {
                    return invalid(format!("column {k} is not owned by worker {}", self.index));
                }
                let j = k / self.workers;
                match (self.pc.owned_f.get(j), self.pc.owned_h.get(j)) {
                    (Some(f), Some(h)) => Message::Column { f: f.clone(), h: h.clone() },
                    _ => return invalid(format!("column {k} not held")),
                }
            }
            Message::StatsRequest => {
                Message::Stats { gate_evals: self.gate_evals, busy_micros: self.busy.as_micros() as u64 }
            }
            other => return invalid(format!("unexpected message {:?}", other.to_frame().tag)),
        };
        Ok(Some(reply))
    }

    fn gkr_mut(&mut self) -> Result<&mut LocalGkr> {
        self.gkr.as_mut().ok_or_else(|| Error::InvalidArgument("no circuit assigned".into()))
    }

    fn round_reply(&mut self) -> Result<Message> {
        let (vars, backend): (usize, &mut dyn SumcheckBackend) = match &mut self.active {
            Active::Idle => return invalid("no sumcheck in progress"),
            Active::Plain(p) => (p.num_vars(), p),
            Active::Gkr => {
                let g = self.gkr.as_mut().expect("phase started");
                (g.local_vars(), g)
            }
        };
        Ok(if vars > 0 {
            Message::RoundEvals(backend.round_evals()?)
        } else {
            Message::Folded(backend.folded()?[0])
        })
    }

    fn setup(
        &mut self,
        index: usize,
        workers: usize,
        text: &str,
        first_copy: usize,
        log_copies: usize,
        input: &[FieldElement],
    ) -> Result<Message> {
        if workers == 0 || index >= workers {
            return invalid(format!("worker index {index} of {workers}"));
        }
        let (sub, _) = parse_circuit(text)?;
        let block = DataParallelCircuit::new(sub, 1 << log_copies)?;
        let values = block.evaluate(input)?;
        let m = block.sub().input_size();
        if m < 2 {
            return invalid("per-copy input too small to split");
        }
        self.index = index;
        self.workers = workers;
        self.gate_evals = values.gate_evals;
        self.pc = PcState {
            tables: input.chunks(m).map(|c| c[m / 2..].to_vec()).collect(),
            ..PcState::default()
        };
        let outputs = values.output().to_vec();
        let block = CopyBlock {
            sub: Arc::new(block.sub().clone()),
            values: values.values,
            first_copy,
            log_copies,
        };
        self.gkr = Some(LocalGkr::new(vec![block]));
        self.active = Active::Idle;
        Ok(Message::Ready { gate_evals: self.gate_evals, outputs })
    }

    /// This worker's values split by column owner.
    fn slices(&self, kind: ColumnKind, codewords: &[Vec<FieldElement>]) -> Message {
        let len = codewords.first().map_or(0, Vec::len);
        let slices = (0..self.workers)
            .map(|owner| {
                (owner..len)
                    .step_by(self.workers)
                    .flat_map(|k| codewords.iter().map(move |c| c[k]))
                    .collect()
            })
            .collect();
        Message::Slices { kind, slices }
    }

    fn pc_commit(&mut self, params: PcParams) -> Result<Message> {
        params.validate()?;
        if self.pc.tables.is_empty() {
            return invalid("no tables to commit");
        }
        if (1usize << (params.log_size + params.log_rate)) % self.workers != 0 {
            return invalid("evaluation domain smaller than the cluster");
        }
        let mut coeffs = Vec::new();
        let mut codewords = Vec::new();
        for t in &self.pc.tables {
            let (c, e) = encode(t, &params)?;
            coeffs.push(c);
            codewords.push(e);
        }
        self.pc.params = Some(params);
        self.pc.coeffs = coeffs;
        self.pc.codewords = codewords;
        Ok(self.slices(ColumnKind::Values, &self.pc.codewords))
    }

    fn params(&self) -> Result<PcParams> {
        self.pc.params.ok_or_else(|| Error::InvalidArgument("nothing committed".into()))
    }

    fn pc_quotients(&mut self, points: &[Vec<FieldElement>], mu: FieldElement) -> Result<Message> {
        let params = self.params()?;
        if points.is_empty() || points.iter().any(|p| p.len() != params.log_size) {
            return invalid("malformed opening points");
        }
        self.pc.w_coeffs = weight_coefficients(points, mu, &params)?;
        let l = params.l_domain();
        self.pc.quotients = self
            .pc
            .coeffs
            .iter()
            .map(|c| fft_evaluate(&quotient(c, &self.pc.w_coeffs, &params)?, &l))
            .collect::<Result<_>>()?;
        Ok(self.slices(ColumnKind::Quotients, &self.pc.quotients))
    }

    fn receive_columns(&mut self, kind: ColumnKind, slices: &[Vec<FieldElement>]) -> Result<Message> {
        let params = self.params()?;
        let owned = (1usize << (params.log_size + params.log_rate)) / self.workers;
        if slices.len() != self.workers || slices.iter().any(|s| s.len() % owned != 0) {
            return invalid("malformed column delivery");
        }
        let bundles: Vec<Vec<FieldElement>> = (0..owned)
            .map(|j| {
                slices
                    .iter()
                    .flat_map(|s| {
                        let per = s.len() / owned;
                        s[j * per..(j + 1) * per].iter().copied()
                    })
                    .collect()
            })
            .collect();
        let hashes = bundles.iter().map(|b| hash_leaf(&column_bytes(b))).collect();
        match kind {
            ColumnKind::Values => self.pc.owned_f = bundles,
            ColumnKind::Quotients => self.pc.owned_h = bundles,
        }
        Ok(Message::ColumnHashes { kind, hashes })
    }

    fn pc_combine(&mut self, comb: Combiner, claims: &[FieldElement]) -> Result<Message> {
        let params = self.params()?;
        if self.pc.owned_h.len() != self.pc.owned_f.len() || self.pc.w_coeffs.is_empty() {
            return invalid("quotients not committed");
        }
        if self.pc.owned_f.first().is_some_and(|b| b.len() != claims.len()) {
            return invalid("claim count does not match the bundle width");
        }
        let ctx = position_contexts(&self.pc.w_coeffs, &params)?;
        let values = self
            .pc
            .owned_f
            .iter()
            .zip(&self.pc.owned_h)
            .enumerate()
            .map(|(j, (f, h))| combine_column(&ctx[self.index + j * self.workers], f, h, claims, &comb))
            .collect();
        Ok(Message::Combined(values))
    }
}

/// Accepts coordinator sessions on `listener`, one at a time. Each session
/// gets a fresh worker. Returns after `sessions` sessions if given.
pub fn serve(listener: &TcpListener, expected_hash: Option<Digest>, sessions: Option<usize>) -> Result<()> {
    let mut served = 0;
    while sessions.map_or(true, |n| served < n) {
        let (stream, peer) = listener.accept()?;
        log::info!("coordinator connected from {peer}");
        let mut link = TcpLink::new(stream)?;
        if let Err(e) = Worker::new(expected_hash).run(&mut link) {
            log::warn!("session with {peer} ended: {e}");
        }
        served += 1;
    }
    Ok(())
}
