//! Distributed proving for data-parallel circuits.
//!
//! A proof for `N` copies of a sub-circuit has three parts, produced in this
//! transcript order:
//!
//! 1. A bundled commitment to the witness half of every copy's input.
//! 2. GKR over the whole circuit, ending with two claims about the input
//!    layer's multilinear extension.
//! 3. One bundled opening of the witness commitment at the two points.
//!
//! Each copy's input has `2^s` slots: the low half is public and the high half
//! is witness. With the input labelled `copy * 2^s + slot`, an input-layer
//! point splits as `(low, sel, high)` and
//! `V(low, sel, high) = (1 - sel) X(low, high) + sel * sum_i eq(high, i) W_i(low)`
//! where `X` is the public input (evaluated directly by the verifier) and
//! `W_i(low)` are the per-copy values from the opening.
//!
//! The same driver runs against a [`LocalProver`] (one process) or a
//! [`Cluster`] (coordinator plus workers), and the proofs are byte-identical.

mod cluster;
mod compress;
pub mod message;
pub mod transport;
mod worker;

pub use cluster::{dist_pc_commit, dist_sumcheck, Cluster, ClusterConfig, CommStats, WorkerStats};
pub use compress::{CompressedProof, Compressor, IdentityCompressor};
pub use worker::{serve, Worker};

use std::sync::Arc;

use crate::circuit::{CircuitShape, DataParallelCircuit};
use crate::codec::{Reader, Writer};
use crate::error::{invalid, Error, Result};
use crate::field::{mle::beta_index, mle::fold_evaluate, FieldElement};
use crate::iop::gkr::{prove_layers, verify_layers, CopyBlock, GkrBackend, LocalGkr, WeightTerms};
use crate::iop::{GkrProof, SumcheckBackend, Transcript};
use crate::merkle::MerkleRoot;
use crate::pc::{
    commit_bundle, open_with_backend, verify_bundle, ColumnOpening, Combiner, PcBackend, PcCommitment,
    PcOpeningProof, PcParams, PcProverState,
};

pub const PROTOCOL_VERSION: u32 = 1;
pub const PROOF_MAGIC: &[u8; 4] = b"DVG1";
pub const TRANSCRIPT_LABEL: &[u8] = b"zkbridge/devirgo/v1";

const CIRCUIT_LABEL: &[u8] = b"devirgo/circuit";
const COPIES_LABEL: &[u8] = b"devirgo/copies";
const PUBLIC_LABEL: &[u8] = b"devirgo/public";
const WITNESS_ROOT_LABEL: &[u8] = b"devirgo/witness-root";

/// Commitment parameters shared by prover and verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProofConfig {
    pub log_rate: usize,
    pub queries: usize,
}

impl Default for ProofConfig {
    fn default() -> Self {
        Self { log_rate: 3, queries: 16 }
    }
}

impl ProofConfig {
    /// Parameters for committing one copy's witness half.
    pub fn pc_params(&self, circuit: &DataParallelCircuit) -> Result<PcParams> {
        let s = circuit.sub().input_size().trailing_zeros() as usize;
        if s < 2 {
            return invalid("copies need at least four input slots");
        }
        PcParams::new(s - 1, self.log_rate, self.queries)
    }

    pub fn cluster(&self, workers: usize) -> ClusterConfig {
        ClusterConfig { workers, log_rate: self.log_rate, queries: self.queries }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeVirgoProof {
    pub witness_root: MerkleRoot,
    pub gkr: GkrProof,
    pub pc: PcOpeningProof,
}

impl DeVirgoProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(PROOF_MAGIC).digest(&self.witness_root.0);
        self.gkr.write(&mut w);
        self.pc.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.bytes(4)? != PROOF_MAGIC {
            return Err(Error::Decode("not a proof (bad magic)".into()));
        }
        let witness_root = MerkleRoot(r.digest()?);
        let gkr = GkrProof::read(&mut r)?;
        let pc = PcOpeningProof::read(&mut r)?;
        r.finish()?;
        Ok(Self { witness_root, gkr, pc })
    }
}

/// Splits the global input into the public halves (concatenated) and the
/// per-copy witness halves.
pub fn split_input(circuit: &DataParallelCircuit, input: &[FieldElement]) -> Result<(Vec<FieldElement>, Vec<Vec<FieldElement>>)> {
    if input.len() != circuit.input_size() {
        return invalid(format!("expected {} inputs, got {}", circuit.input_size(), input.len()));
    }
    let m = circuit.sub().input_size();
    let mut public = Vec::with_capacity(input.len() / 2);
    let mut witness = Vec::with_capacity(circuit.copies());
    for chunk in input.chunks(m) {
        public.extend_from_slice(&chunk[..m / 2]);
        witness.push(chunk[m / 2..].to_vec());
    }
    Ok((public, witness))
}

/// `sum_i eq(high, i) * values[i]`: the global multilinear extension at
/// `(low, high)` from each copy's value at `low`.
pub fn eq2_aggregate(values: &[FieldElement], high: &[FieldElement]) -> FieldElement {
    values.iter().enumerate().map(|(i, v)| beta_index(high, i) * *v).sum()
}

fn statement_transcript(circuit: &DataParallelCircuit, public: &[FieldElement], identity: &[u8]) -> Transcript {
    let mut t = Transcript::new(TRANSCRIPT_LABEL, identity);
    t.append_digest(CIRCUIT_LABEL, &circuit.fingerprint());
    t.append_u64(COPIES_LABEL, circuit.copies() as u64);
    t.append_fes(PUBLIC_LABEL, public);
    t
}

/// A prover backend able to run every phase.
pub trait ProverBackend: GkrBackend + PcBackend {
    fn commit_witness(&mut self, params: &PcParams) -> Result<PcCommitment>;
}

/// Every copy in this process.
pub struct LocalProver {
    gkr: LocalGkr,
    witness: Vec<Vec<FieldElement>>,
    pc: Option<PcProverState>,
}

impl LocalProver {
    /// Evaluates the circuit; returns the prover and the output layer.
    pub fn new(circuit: &DataParallelCircuit, input: &[FieldElement]) -> Result<(Self, Vec<FieldElement>)> {
        let (_, witness) = split_input(circuit, input)?;
        let values = circuit.evaluate(input)?;
        let outputs = values.output().to_vec();
        let block = CopyBlock {
            sub: Arc::new(circuit.sub().clone()),
            values: values.values,
            first_copy: 0,
            log_copies: circuit.log_copies(),
        };
        Ok((Self { gkr: LocalGkr::new(vec![block]), witness, pc: None }, outputs))
    }

    fn pc(&mut self) -> Result<&mut PcProverState> {
        self.pc.as_mut().ok_or_else(|| Error::InvalidArgument("witness not committed".into()))
    }
}

impl SumcheckBackend for LocalProver {
    fn round_evals(&mut self) -> Result<[FieldElement; 3]> {
        self.gkr.round_evals()
    }

    fn bind(&mut self, r: FieldElement) -> Result<()> {
        self.gkr.bind(r)
    }

    fn folded(&mut self) -> Result<Vec<[FieldElement; 3]>> {
        self.gkr.folded()
    }
}

impl GkrBackend for LocalProver {
    fn begin_phase1(&mut self, layer: usize, terms: &WeightTerms) -> Result<()> {
        self.gkr.begin_phase1(layer, terms)
    }

    fn begin_phase2(&mut self, layer: usize, u: &[FieldElement], v_u: FieldElement) -> Result<()> {
        self.gkr.begin_phase2(layer, u, v_u)
    }
}

impl PcBackend for LocalProver {
    fn copies(&self) -> usize {
        self.witness.len()
    }

    fn evaluate(&mut self, points: &[Vec<FieldElement>]) -> Result<Vec<Vec<FieldElement>>> {
        self.pc()?.evaluate(points)
    }

    fn commit_quotients(&mut self, points: &[Vec<FieldElement>], mu: FieldElement) -> Result<MerkleRoot> {
        self.pc()?.commit_quotients(points, mu)
    }

    fn combined_codeword(&mut self, comb: &Combiner, claims: &[FieldElement]) -> Result<Vec<FieldElement>> {
        self.pc()?.combined_codeword(comb, claims)
    }

    fn open_columns(&mut self, k: usize) -> Result<(ColumnOpening, ColumnOpening)> {
        self.pc()?.open_columns(k)
    }
}

impl ProverBackend for LocalProver {
    fn commit_witness(&mut self, params: &PcParams) -> Result<PcCommitment> {
        let (com, state) = commit_bundle(self.witness.clone(), params)?;
        self.pc = Some(state);
        Ok(com)
    }
}

impl ProverBackend for Cluster {
    fn commit_witness(&mut self, params: &PcParams) -> Result<PcCommitment> {
        self.pc_commit(params)
    }
}

fn prove_with<B: ProverBackend + ?Sized>(
    backend: &mut B,
    log_blocks: usize,
    circuit: &DataParallelCircuit,
    public: &[FieldElement],
    outputs: &[FieldElement],
    identity: &[u8],
    config: &ProofConfig,
) -> Result<DeVirgoProof> {
    let params = config.pc_params(circuit)?;
    let mut t = statement_transcript(circuit, public, identity);
    let com = backend.commit_witness(&params)?;
    t.append_root(WITNESS_ROOT_LABEL, &com.root);
    let sizes: Vec<usize> = (0..=circuit.depth()).map(|i| circuit.layer_log_size(i)).collect();
    let (gkr, claim) = prove_layers(backend, &sizes, log_blocks, outputs, &mut t)?;
    let low = params.log_size;
    let points = [claim.u[..low].to_vec(), claim.v[..low].to_vec()];
    let pc = open_with_backend(backend, &params, &points, &mut t)?;
    Ok(DeVirgoProof { witness_root: com.root, gkr, pc })
}

/// Single-process prover. Returns the output layer and the proof.
pub fn virgo_prove(
    circuit: &DataParallelCircuit,
    input: &[FieldElement],
    identity: &[u8],
    config: &ProofConfig,
) -> Result<(Vec<FieldElement>, DeVirgoProof)> {
    let (public, _) = split_input(circuit, input)?;
    let (mut prover, outputs) = LocalProver::new(circuit, input)?;
    let proof = prove_with(&mut prover, 0, circuit, &public, &outputs, identity, config)?;
    Ok((outputs, proof))
}

/// Distributed prover: the cluster's workers each evaluate and commit a block
/// of copies. The coordinator only sees public inputs, round messages and
/// column openings.
pub fn devirgo_prove(
    cluster: &mut Cluster,
    circuit: &DataParallelCircuit,
    input: &[FieldElement],
    identity: &[u8],
    config: &ProofConfig,
) -> Result<(Vec<FieldElement>, DeVirgoProof)> {
    let (public, _) = split_input(circuit, input)?;
    let outputs = cluster.setup(circuit, input)?;
    let log_blocks = cluster.workers().trailing_zeros() as usize;
    let proof = prove_with(cluster, log_blocks, circuit, &public, &outputs, identity, config)?;
    Ok((outputs, proof))
}

/// Checks that `circuit` on public inputs `public` (every copy's public half,
/// concatenated) and some committed witness outputs `outputs`.
pub fn devirgo_verify(
    circuit: &DataParallelCircuit,
    public: &[FieldElement],
    outputs: &[FieldElement],
    proof: &DeVirgoProof,
    identity: &[u8],
    config: &ProofConfig,
) -> bool {
    let Ok(params) = config.pc_params(circuit) else {
        return false;
    };
    if public.len() != circuit.input_size() / 2 {
        return false;
    }
    let mut t = statement_transcript(circuit, public, identity);
    t.append_root(WITNESS_ROOT_LABEL, &proof.witness_root);
    let Some(claim) = verify_layers(circuit, outputs, &proof.gkr, &mut t) else {
        return false;
    };
    let low = params.log_size;
    if proof.pc.evals.len() != 2 || proof.pc.evals.iter().any(|e| e.len() != circuit.copies()) {
        return false;
    }
    for (p, (point, value)) in [(&claim.u, claim.v_u), (&claim.v, claim.v_v)].into_iter().enumerate() {
        let (lo, rest) = point.split_at(low);
        let (sel, high) = (rest[0], &rest[1..]);
        let mut public_point = lo.to_vec();
        public_point.extend_from_slice(high);
        let x = fold_evaluate(public, &public_point);
        let w = eq2_aggregate(&proof.pc.evals[p], high);
        if value != (FieldElement::ONE - sel) * x + sel * w {
            return false;
        }
    }
    let points = [claim.u[..low].to_vec(), claim.v[..low].to_vec()];
    verify_bundle(&PcCommitment { root: proof.witness_root }, &params, circuit.copies(), &points, &proof.pc, &mut t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::light_client::{
        build_light_client_circuit, circuit_input, toy_public_key, toy_sign, LightClientParams, SignatureInstance,
    };
    use crate::circuit::{replicate, tests::random_circuit};
    use crate::field::{fe, mle_evaluate, MultilinearTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ROUNDS: usize = 8;

    fn instances(n: usize, forged: Option<usize>) -> Vec<SignatureInstance> {
        let digest = [7u8; 32];
        (0..n)
            .map(|i| {
                let secret = fe(1000 + i as u64);
                let nonce = fe(55 + i as u64);
                let mut signature = toy_sign(secret, nonce, &digest, ROUNDS);
                if forged == Some(i) {
                    signature += fe(1);
                }
                SignatureInstance { public_key: toy_public_key(secret, ROUNDS), signature, digest, secret, nonce }
            })
            .collect()
    }

    fn config() -> ProofConfig {
        ProofConfig { log_rate: 2, queries: 8 }
    }

    #[test]
    fn light_client_proof_accepted_and_distributed_proof_identical() {
        let circuit = build_light_client_circuit(LightClientParams { signatures: 4, rounds: ROUNDS }).unwrap();
        let input = circuit_input(&instances(4, None));
        let (public, _) = split_input(&circuit, &input).unwrap();
        let (outputs, proof) = virgo_prove(&circuit, &input, b"relay-1", &config()).unwrap();
        assert!(outputs.iter().all(|v| *v == FieldElement::ONE));
        assert!(devirgo_verify(&circuit, &public, &outputs, &proof, b"relay-1", &config()));
        assert!(!devirgo_verify(&circuit, &public, &outputs, &proof, b"relay-2", &config()));
        let bytes = proof.to_bytes();
        assert_eq!(DeVirgoProof::from_bytes(&bytes).unwrap(), proof);
        for workers in [1, 2, 4] {
            let mut cluster = Cluster::in_process(workers).unwrap();
            let (o, p) = devirgo_prove(&mut cluster, &circuit, &input, b"relay-1", &config()).unwrap();
            assert_eq!(o, outputs);
            assert_eq!(p.to_bytes(), bytes, "{workers} workers");
            let stats = cluster.worker_stats().unwrap();
            let per = circuit.gate_count() / workers as u64;
            assert!(stats.iter().all(|s| s.gate_evals == per));
        }
    }

    #[test]
    fn forged_signature_cannot_claim_all_ones() {
        let circuit = build_light_client_circuit(LightClientParams { signatures: 4, rounds: ROUNDS }).unwrap();
        let input = circuit_input(&instances(4, Some(2)));
        let (public, _) = split_input(&circuit, &input).unwrap();
        let (outputs, proof) = virgo_prove(&circuit, &input, b"id", &config()).unwrap();
        assert!(outputs.iter().any(|v| *v != FieldElement::ONE));
        assert!(devirgo_verify(&circuit, &public, &outputs, &proof, b"id", &config()));
        let ones = vec![FieldElement::ONE; outputs.len()];
        assert!(!devirgo_verify(&circuit, &public, &ones, &proof, b"id", &config()));
        let mut forged = proof.clone();
        forged.gkr.outputs = ones.clone();
        assert!(!devirgo_verify(&circuit, &public, &ones, &forged, b"id", &config()));
    }

    #[test]
    fn public_inputs_are_bound() {
        let circuit = build_light_client_circuit(LightClientParams { signatures: 2, rounds: ROUNDS }).unwrap();
        let input = circuit_input(&instances(2, None));
        let (mut public, _) = split_input(&circuit, &input).unwrap();
        let (outputs, proof) = virgo_prove(&circuit, &input, b"id", &config()).unwrap();
        public[3] += fe(1);
        assert!(!devirgo_verify(&circuit, &public, &outputs, &proof, b"id", &config()));
    }

    #[test]
    fn byte_flips_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let circuit = build_light_client_circuit(LightClientParams { signatures: 2, rounds: 4 }).unwrap();
        let input = circuit_input(&instances(2, None));
        let (public, _) = split_input(&circuit, &input).unwrap();
        let (outputs, proof) = virgo_prove(&circuit, &input, b"id", &config()).unwrap();
        let bytes = proof.to_bytes();
        for _ in 0..200 {
            let mut b = bytes.clone();
            let i = rng.gen_range(0..b.len());
            b[i] ^= 1 << rng.gen_range(0..8);
            if let Ok(p) = DeVirgoProof::from_bytes(&b) {
                assert!(!devirgo_verify(&circuit, &public, &outputs, &p, b"id", &config()), "flip at {i}");
            }
        }
    }

    #[test]
    fn random_data_parallel_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let sub = loop {
                let c = random_circuit(&mut rng, 3, 3);
                if c.input_size() >= 4 {
                    break c;
                }
            };
            let copies = 1 << rng.gen_range(0..3);
            let circuit = replicate(sub, copies).unwrap();
            let input: Vec<_> = (0..circuit.input_size()).map(|_| FieldElement::random(&mut rng)).collect();
            let (public, _) = split_input(&circuit, &input).unwrap();
            let (outputs, proof) = virgo_prove(&circuit, &input, b"id", &config()).unwrap();
            assert!(devirgo_verify(&circuit, &public, &outputs, &proof, b"id", &config()));
            let mut cluster = Cluster::in_process(copies).unwrap();
            let (_, p) = devirgo_prove(&mut cluster, &circuit, &input, b"id", &config()).unwrap();
            assert_eq!(p, proof);
        }
    }

    #[test]
    fn eq2_aggregation_matches_global_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (low, high) = (rng.gen_range(1..4), rng.gen_range(0..4));
            let tables: Vec<Vec<FieldElement>> =
                (0..1 << high).map(|_| (0..1 << low).map(|_| FieldElement::random(&mut rng)).collect()).collect();
            let r: Vec<_> = (0..low + high).map(|_| FieldElement::random(&mut rng)).collect();
            let per_copy: Vec<_> = tables.iter().map(|t| fold_evaluate(t, &r[..low])).collect();
            let global = MultilinearTable::new(tables.concat()).unwrap();
            assert_eq!(eq2_aggregate(&per_copy, &r[low..]), mle_evaluate(&global, &r).unwrap());
        }
    }

    #[test]
    fn tcp_cluster_produces_the_same_proof() {
        let circuit = build_light_client_circuit(LightClientParams { signatures: 2, rounds: 4 }).unwrap();
        let input = circuit_input(&instances(2, None));
        let cfg = config();
        let cluster_cfg = cfg.cluster(2);
        let mut addrs = Vec::new();
        let mut handles = Vec::new();
        for _ in 0..2 {
            let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            addrs.push(listener.local_addr().unwrap().to_string());
            let hash = cluster_cfg.hash();
            handles.push(std::thread::spawn(move || serve(&listener, Some(hash), Some(1))));
        }
        let (_, expected) = virgo_prove(&circuit, &input, b"id", &cfg).unwrap();
        {
            let mut cluster = Cluster::connect(&addrs, &cluster_cfg).unwrap();
            let (_, proof) = devirgo_prove(&mut cluster, &circuit, &input, b"id", &cfg).unwrap();
            assert_eq!(proof, expected);
        }
        for h in handles {
            h.join().unwrap().unwrap();
        }

        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let other = ClusterConfig { queries: 9, ..cluster_cfg };
        let h = std::thread::spawn(move || serve(&listener, Some(other.hash()), Some(1)));
        let one = ClusterConfig { workers: 1, ..cluster_cfg };
        assert!(Cluster::connect(&[addr], &one).is_err());
        h.join().unwrap().unwrap();
    }
}
