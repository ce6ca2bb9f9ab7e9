//! Typed messages exchanged between the coordinator and workers.

use super::transport::Frame;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::iop::gkr::WeightTerms;
use crate::iop::ProductSum;
use crate::merkle::Digest;
use crate::pc::PcParams;

const MAX_VEC: usize = 1 << 26;

/// Which committed matrix a column message refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    /// The committed tables themselves.
    Values,
    /// The quotients of the current opening.
    Quotients,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Hello { version: u32, config_hash: Digest },
    HelloAck { version: u32, config_hash: Digest },
    /// Assigns copies `first_copy .. first_copy + 2^log_copies` of the
    /// sub-circuit (in text form) and their inputs.
    Setup { worker: u32, workers: u32, circuit: String, first_copy: u64, log_copies: u32, input: Vec<FieldElement> },
    /// The block is evaluated; carries its slice of the output layer.
    Ready { gate_evals: u64, outputs: Vec<FieldElement> },
    LoadSumcheck(ProductSum),
    BeginPhase1 { layer: u32, terms: WeightTerms },
    BeginPhase2 { layer: u32, u: Vec<FieldElement>, v_u: FieldElement },
    Bind(FieldElement),
    RoundEvals([FieldElement; 3]),
    Folded([FieldElement; 3]),
    /// Replaces the tables the worker commits to.
    PcLoad { worker: u32, workers: u32, tables: Vec<Vec<FieldElement>> },
    PcCommit(PcParams),
    PcEvaluate(Vec<Vec<FieldElement>>),
    /// `[point][local copy]`.
    Evals(Vec<Vec<FieldElement>>),
    PcQuotients { points: Vec<Vec<FieldElement>>, mu: FieldElement },
    /// A worker's values for the columns of each owner, indexed by owner.
    Slices { kind: ColumnKind, slices: Vec<Vec<FieldElement>> },
    /// Every worker's values for the receiver's columns, indexed by source.
    Deliver { kind: ColumnKind, slices: Vec<Vec<FieldElement>> },
    ColumnHashes { kind: ColumnKind, hashes: Vec<Digest> },
    PcCombine { beta: [FieldElement; 3], gamma: FieldElement, claims: Vec<FieldElement> },
    Combined(Vec<FieldElement>),
    PcOpen(u64),
    Column { f: Vec<FieldElement>, h: Vec<FieldElement> },
    StatsRequest,
    Stats { gate_evals: u64, busy_micros: u64 },
    Error(String),
    Shutdown,
}

mod tag {
    pub const HELLO: u8 = 1;
    pub const HELLO_ACK: u8 = 2;
    pub const SETUP: u8 = 3;
    pub const READY: u8 = 4;
    pub const LOAD_SUMCHECK: u8 = 5;
    pub const BEGIN_PHASE1: u8 = 6;
    pub const BEGIN_PHASE2: u8 = 7;
    pub const BIND: u8 = 8;
    pub const ROUND_EVALS: u8 = 9;
    pub const FOLDED: u8 = 10;
    pub const PC_LOAD: u8 = 11;
    pub const PC_COMMIT: u8 = 12;
    pub const PC_EVALUATE: u8 = 13;
    pub const EVALS: u8 = 14;
    pub const PC_QUOTIENTS: u8 = 15;
    pub const SLICES: u8 = 16;
    pub const DELIVER: u8 = 17;
    pub const COLUMN_HASHES: u8 = 18;
    pub const PC_COMBINE: u8 = 19;
    pub const COMBINED: u8 = 20;
    pub const PC_OPEN: u8 = 21;
    pub const COLUMN: u8 = 22;
    pub const STATS_REQUEST: u8 = 23;
    pub const STATS: u8 = 24;
    pub const ERROR: u8 = 25;
    pub const SHUTDOWN: u8 = 26;
}

fn write_matrix(w: &mut Writer, m: &[Vec<FieldElement>]) {
    w.u32(m.len() as u32);
    for row in m {
        w.fes(row);
    }
}

fn read_matrix(r: &mut Reader<'_>) -> Result<Vec<Vec<FieldElement>>> {
    let n = r.u32()? as usize;
    if n > MAX_VEC {
        return Err(Error::Decode(format!("{n} rows")));
    }
    (0..n).map(|_| r.fes(MAX_VEC)).collect()
}

fn read_triple(r: &mut Reader<'_>) -> Result<[FieldElement; 3]> {
    Ok([r.fe()?, r.fe()?, r.fe()?])
}

fn kind_byte(k: ColumnKind) -> u8 {
    match k {
        ColumnKind::Values => 0,
        ColumnKind::Quotients => 1,
    }
}

fn read_kind(r: &mut Reader<'_>) -> Result<ColumnKind> {
    match r.u8()? {
        0 => Ok(ColumnKind::Values),
        1 => Ok(ColumnKind::Quotients),
        k => Err(Error::Decode(format!("column kind {k}"))),
    }
}

impl Message {
    pub fn to_frame(&self) -> Frame {
        let mut w = Writer::new();
        let t = match self {
            Message::Hello { version, config_hash } => {
                w.u32(*version).digest(config_hash);
                tag::HELLO
            }
            Message::HelloAck { version, config_hash } => {
                w.u32(*version).digest(config_hash);
                tag::HELLO_ACK
            }
            Message::Setup { worker, workers, circuit, first_copy, log_copies, input } => {
                w.u32(*worker).u32(*workers).blob(circuit.as_bytes()).u64(*first_copy).u32(*log_copies).fes(input);
                tag::SETUP
            }
            Message::Ready { gate_evals, outputs } => {
                w.u64(*gate_evals).fes(outputs);
                tag::READY
            }
            Message::LoadSumcheck(p) => {
                w.fes(&p.a).fes(&p.b).fes(&p.c);
                tag::LOAD_SUMCHECK
            }
            Message::BeginPhase1 { layer, terms } => {
                w.u32(*layer).u32(terms.len() as u32);
                for (c, p) in terms {
                    w.fe(*c).fes(p);
                }
                tag::BEGIN_PHASE1
            }
            Message::BeginPhase2 { layer, u, v_u } => {
                w.u32(*layer).fes(u).fe(*v_u);
                tag::BEGIN_PHASE2
            }
            Message::Bind(r) => {
                w.fe(*r);
                tag::BIND
            }
            Message::RoundEvals(e) => {
                e.iter().for_each(|v| {
                    w.fe(*v);
                });
                tag::ROUND_EVALS
            }
            Message::Folded(e) => {
                e.iter().for_each(|v| {
                    w.fe(*v);
                });
                tag::FOLDED
            }
            Message::PcLoad { worker, workers, tables } => {
                w.u32(*worker).u32(*workers);
                write_matrix(&mut w, tables);
                tag::PC_LOAD
            }
            Message::PcCommit(p) => {
                w.u32(p.log_size as u32).u32(p.log_rate as u32).u32(p.queries as u32);
                tag::PC_COMMIT
            }
            Message::PcEvaluate(m) => {
                write_matrix(&mut w, m);
                tag::PC_EVALUATE
            }
            Message::Evals(m) => {
                write_matrix(&mut w, m);
                tag::EVALS
            }
            Message::PcQuotients { points, mu } => {
                write_matrix(&mut w, points);
                w.fe(*mu);
                tag::PC_QUOTIENTS
            }
            Message::Slices { kind, slices } => {
                w.u8(kind_byte(*kind));
                write_matrix(&mut w, slices);
                tag::SLICES
            }
            Message::Deliver { kind, slices } => {
                w.u8(kind_byte(*kind));
                write_matrix(&mut w, slices);
                tag::DELIVER
            }
            Message::ColumnHashes { kind, hashes } => {
                w.u8(kind_byte(*kind)).u32(hashes.len() as u32);
                for h in hashes {
                    w.digest(h);
                }
                tag::COLUMN_HASHES
            }
            Message::PcCombine { beta, gamma, claims } => {
                w.fe(beta[0]).fe(beta[1]).fe(beta[2]).fe(*gamma).fes(claims);
                tag::PC_COMBINE
            }
            Message::Combined(v) => {
                w.fes(v);
                tag::COMBINED
            }
            Message::PcOpen(k) => {
                w.u64(*k);
                tag::PC_OPEN
            }
            Message::Column { f, h } => {
                w.fes(f).fes(h);
                tag::COLUMN
            }
            Message::StatsRequest => tag::STATS_REQUEST,
            Message::Stats { gate_evals, busy_micros } => {
                w.u64(*gate_evals).u64(*busy_micros);
                tag::STATS
            }
            Message::Error(e) => {
                w.blob(e.as_bytes());
                tag::ERROR
            }
            Message::Shutdown => tag::SHUTDOWN,
        };
        Frame::new(t, w.finish())
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let mut reader = Reader::new(&frame.payload);
        let r = &mut reader;
        let string = |r: &mut Reader<'_>| -> Result<String> {
            String::from_utf8(r.blob()?.to_vec()).map_err(|_| Error::Decode("non-UTF-8 text".into()))
        };
        let msg = match frame.tag {
            tag::HELLO => Message::Hello { version: r.u32()?, config_hash: r.digest()? },
            tag::HELLO_ACK => Message::HelloAck { version: r.u32()?, config_hash: r.digest()? },
            tag::SETUP => Message::Setup {
                worker: r.u32()?,
                workers: r.u32()?,
                circuit: string(r)?,
                first_copy: r.u64()?,
                log_copies: r.u32()?,
                input: r.fes(MAX_VEC)?,
            },
            tag::READY => Message::Ready { gate_evals: r.u64()?, outputs: r.fes(MAX_VEC)? },
            tag::LOAD_SUMCHECK => {
                Message::LoadSumcheck(ProductSum::new(r.fes(MAX_VEC)?, r.fes(MAX_VEC)?, r.fes(MAX_VEC)?)?)
            }
            tag::BEGIN_PHASE1 => {
                let layer = r.u32()?;
                let n = r.u32()? as usize;
                if n > 16 {
                    return Err(Error::Decode(format!("{n} weight terms")));
                }
                let terms = (0..n).map(|_| Ok((r.fe()?, r.fes(64)?))).collect::<Result<_>>()?;
                Message::BeginPhase1 { layer, terms }
            }
            tag::BEGIN_PHASE2 => Message::BeginPhase2 { layer: r.u32()?, u: r.fes(64)?, v_u: r.fe()? },
            tag::BIND => Message::Bind(r.fe()?),
            tag::ROUND_EVALS => Message::RoundEvals(read_triple(r)?),
            tag::FOLDED => Message::Folded(read_triple(r)?),
            tag::PC_LOAD => Message::PcLoad { worker: r.u32()?, workers: r.u32()?, tables: read_matrix(r)? },
            tag::PC_COMMIT => Message::PcCommit(PcParams {
                log_size: r.u32()? as usize,
                log_rate: r.u32()? as usize,
                queries: r.u32()? as usize,
            }),
            tag::PC_EVALUATE => Message::PcEvaluate(read_matrix(r)?),
            tag::EVALS => Message::Evals(read_matrix(r)?),
            tag::PC_QUOTIENTS => Message::PcQuotients { points: read_matrix(r)?, mu: r.fe()? },
            tag::SLICES => Message::Slices { kind: read_kind(r)?, slices: read_matrix(r)? },
            tag::DELIVER => Message::Deliver { kind: read_kind(r)?, slices: read_matrix(r)? },
            tag::COLUMN_HASHES => {
                let kind = read_kind(r)?;
                let n = r.u32()? as usize;
                if n > MAX_VEC {
                    return Err(Error::Decode(format!("{n} column hashes")));
                }
                Message::ColumnHashes { kind, hashes: (0..n).map(|_| r.digest()).collect::<Result<_>>()? }
            }
            tag::PC_COMBINE => Message::PcCombine {
                beta: read_triple(r)?,
                gamma: r.fe()?,
                claims: r.fes(MAX_VEC)?,
            },
            tag::COMBINED => Message::Combined(r.fes(MAX_VEC)?),
            tag::PC_OPEN => Message::PcOpen(r.u64()?),
            tag::COLUMN => Message::Column { f: r.fes(MAX_VEC)?, h: r.fes(MAX_VEC)? },
            tag::STATS_REQUEST => Message::StatsRequest,
            tag::STATS => Message::Stats { gate_evals: r.u64()?, busy_micros: r.u64()? },
            tag::ERROR => Message::Error(string(r)?),
            tag::SHUTDOWN => Message::Shutdown,
            t => return Err(Error::Decode(format!("unknown message tag {t}"))),
        };
        reader.finish()?;
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::fe;

    #[test]
    fn every_message_round_trips() {
        let v = vec![fe(1), fe(2)];
        let msgs = vec![
            Message::Hello { version: 1, config_hash: [3; 32] },
            Message::HelloAck { version: 1, config_hash: [4; 32] },
            Message::Setup { worker: 1, workers: 2, circuit: "inputs 2\n".into(), first_copy: 3, log_copies: 1, input: v.clone() },
            Message::Ready { gate_evals: 99, outputs: v.clone() },
            Message::LoadSumcheck(ProductSum::new(v.clone(), v.clone(), v.clone()).unwrap()),
            Message::BeginPhase1 { layer: 2, terms: vec![(fe(5), v.clone()), (fe(6), v.clone())] },
            Message::BeginPhase2 { layer: 2, u: v.clone(), v_u: fe(7) },
            Message::Bind(fe(8)),
            Message::RoundEvals([fe(1), fe(2), fe(3)]),
            Message::Folded([fe(4), fe(5), fe(6)]),
            Message::PcLoad { worker: 1, workers: 2, tables: vec![v.clone(), v.clone()] },
            Message::PcCommit(PcParams { log_size: 3, log_rate: 2, queries: 5 }),
            Message::PcEvaluate(vec![v.clone()]),
            Message::Evals(vec![v.clone(), vec![]]),
            Message::PcQuotients { points: vec![v.clone()], mu: fe(9) },
            Message::Slices { kind: ColumnKind::Values, slices: vec![v.clone()] },
            Message::Deliver { kind: ColumnKind::Quotients, slices: vec![v.clone(), v.clone()] },
            Message::ColumnHashes { kind: ColumnKind::Quotients, hashes: vec![[1; 32], [2; 32]] },
            Message::PcCombine { beta: [fe(1), fe(2), fe(3)], gamma: fe(4), claims: v.clone() },
            Message::Combined(v.clone()),
            Message::PcOpen(17),
            Message::Column { f: v.clone(), h: v.clone() },
            Message::StatsRequest,
            Message::Stats { gate_evals: 1, busy_micros: 2 },
            Message::Error("boom".into()),
            Message::Shutdown,
        ];
        let mut tags = std::collections::HashSet::new();
        for m in msgs {
            let frame = m.to_frame();
            assert!(tags.insert(frame.tag));
            assert_eq!(Message::from_frame(&frame).unwrap(), m);
            let mut long = frame.clone();
            long.payload.push(0);
            assert!(Message::from_frame(&long).is_err());
        }
        assert!(Message::from_frame(&Frame::new(200, vec![])).is_err());
    }
}
