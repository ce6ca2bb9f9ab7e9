//! GKR for layered circuits with a linear-time prover.
//!
//! Each layer reduces a claim `sum_z G(z) V_i(z)` to evaluations of
//! `V_{i+1}` at two points `u, v` by a sumcheck over `(x, y)`: the `x`
//! variables first (phase 1), then `y` (phase 2). Between layers the two
//! claims are merged with a random linear combination, so the weight `G` is
//! `eq(g, .)` at the output and `a1 eq(u, .) + a2 eq(v, .)` afterwards.
//!
//! The prover side works on [`CopyBlock`]s: runs of consecutive copies of a
//! sub-circuit. A plain circuit is one block holding one copy; the distributed
//! prover gives each worker its own block and runs the same driver.

use std::sync::Arc;

use super::sumcheck::{drive_rounds, verify_rounds, RoundRecorder, SumcheckBackend};
use super::{ProductSum, SumcheckProof, Transcript};
use crate::circuit::{CircuitShape, DataParallelCircuit, GateKind, LayerValues, LayeredCircuit};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::field::{eq_table, mle::beta_index, mle::fold_evaluate, FieldElement};

const OUTPUTS_LABEL: &[u8] = b"gkr/outputs";
const OUTPUT_POINT_LABEL: &[u8] = b"gkr/output-point";
const LAYER_CLAIMS_LABEL: &[u8] = b"gkr/layer-claims";
const COMBINE_LABEL: &[u8] = b"gkr/combine";

/// `sum_k coef_k * eq(point_k, .)` over a layer's global labels.
pub type WeightTerms = Vec<(FieldElement, Vec<FieldElement>)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerProof {
    pub sumcheck: SumcheckProof,
    pub v_u: FieldElement,
    pub v_v: FieldElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GkrProof {
    pub outputs: Vec<FieldElement>,
    pub layers: Vec<LayerProof>,
}

/// The two input-layer evaluations left for the verifier to check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputClaim {
    pub u: Vec<FieldElement>,
    pub v: Vec<FieldElement>,
    pub v_u: FieldElement,
    pub v_v: FieldElement,
}

/// Confirms the input-layer claims, either from the raw input or through a
/// polynomial commitment opening.
pub trait InputOracle {
    fn check(&mut self, claim: &InputClaim, t: &mut Transcript) -> bool;
}

/// The verifier knows the whole input.
pub struct RawInput<'a>(pub &'a [FieldElement]);

impl InputOracle for RawInput<'_> {
    fn check(&mut self, claim: &InputClaim, _t: &mut Transcript) -> bool {
        let n = claim.u.len();
        if self.0.len() != 1 << n || claim.v.len() != n {
            return false;
        }
        fold_evaluate(self.0, &claim.u) == claim.v_u && fold_evaluate(self.0, &claim.v) == claim.v_v
    }
}

/// Consecutive copies `first_copy .. first_copy + 2^log_copies` of `sub` and
/// their evaluated layers (copy-major, as in the global labelling).
#[derive(Clone, Debug)]
pub struct CopyBlock {
    pub sub: Arc<LayeredCircuit>,
    pub values: Vec<Vec<FieldElement>>,
    pub first_copy: usize,
    pub log_copies: usize,
}

impl CopyBlock {
    fn copies(&self) -> usize {
        1 << self.log_copies
    }

    /// `G` restricted to this block's gates in `layer`.
    pub fn weight_table(&self, layer: usize, terms: &WeightTerms) -> Vec<FieldElement> {
        let s = self.sub.layer_log_size(layer);
        let size = 1 << s;
        let mut g = vec![FieldElement::ZERO; size * self.copies()];
        for (coef, point) in terms {
            let eq_low = eq_table(&point[..s]);
            for c in 0..self.copies() {
                let factor = *coef * beta_index(&point[s..], self.first_copy + c);
                for (dst, e) in g[c * size..(c + 1) * size].iter_mut().zip(&eq_low) {
                    *dst += factor * *e;
                }
            }
        }
        g
    }

    /// Phase-1 tables over `x`: `V(x) * (A_add(x) + A_mult(x)) + A_addV(x)`.
    pub fn phase1(&self, layer: usize, weights: &[FieldElement]) -> ProductSum {
        let (size, next_size) = (self.sub.layer_size(layer), self.sub.layer_size(layer + 1));
        let next = &self.values[layer + 1];
        let mut b = vec![FieldElement::ZERO; next.len()];
        let mut c = vec![FieldElement::ZERO; next.len()];
        for copy in 0..self.copies() {
            for (o, gate) in self.sub.layer(layer).iter().enumerate() {
                let w = weights[copy * size + o];
                let l = copy * next_size + gate.left as usize;
                let r = copy * next_size + gate.right as usize;
                match gate.kind {
                    GateKind::Add => {
                        b[l] += w;
                        c[l] += w * next[r];
                    }
                    GateKind::Mul => b[l] += w * next[r],
                    GateKind::Dummy => {}
                }
            }
        }
        ProductSum { a: next.clone(), b, c }
    }

    /// Phase-2 tables over `y` once `x = u`:
    /// `V(y) * (B_add(y) + V(u) B_mult(y)) + V(u) B_add(y)`.
    pub fn phase2(&self, layer: usize, weights: &[FieldElement], u: &[FieldElement], v_u: FieldElement) -> ProductSum {
        let (size, next_size) = (self.sub.layer_size(layer), self.sub.layer_size(layer + 1));
        let s = self.sub.layer_log_size(layer + 1);
        let eq_low = eq_table(&u[..s]);
        let next = &self.values[layer + 1];
        let mut add = vec![FieldElement::ZERO; next.len()];
        let mut mul = vec![FieldElement::ZERO; next.len()];
        for copy in 0..self.copies() {
            let eh = beta_index(&u[s..], self.first_copy + copy);
            for (o, gate) in self.sub.layer(layer).iter().enumerate() {
                let r = copy * next_size + gate.right as usize;
                let w = || weights[copy * size + o] * eq_low[gate.left as usize] * eh;
                match gate.kind {
                    GateKind::Add => add[r] += w(),
                    GateKind::Mul => mul[r] += w(),
                    GateKind::Dummy => {}
                }
            }
        }
        let a = add.iter().zip(&mul).map(|(x, y)| *x + v_u * *y).collect();
        let c = add.iter().map(|x| v_u * *x).collect();
        ProductSum { a, b: next.clone(), c }
    }

    pub fn gate_layer_rounds(&self, layer: usize) -> usize {
        self.sub.layer_log_size(layer + 1) + self.log_copies
    }
}

/// A holder of one or more [`CopyBlock`]s that the GKR driver can steer.
pub trait GkrBackend: SumcheckBackend {
    fn begin_phase1(&mut self, layer: usize, terms: &WeightTerms) -> Result<()>;
    fn begin_phase2(&mut self, layer: usize, u: &[FieldElement], v_u: FieldElement) -> Result<()>;
}

/// All blocks held in this process.
pub struct LocalGkr {
    blocks: Vec<CopyBlock>,
    weights: Vec<Vec<FieldElement>>,
    tables: Vec<ProductSum>,
}

impl LocalGkr {
    pub fn new(blocks: Vec<CopyBlock>) -> Self {
        Self { blocks, weights: Vec::new(), tables: Vec::new() }
    }

    /// Variables still unbound in the current phase's tables.
    pub fn local_vars(&self) -> usize {
        self.tables.first().map_or(0, ProductSum::num_vars)
    }
}

impl SumcheckBackend for LocalGkr {
    fn round_evals(&mut self) -> Result<[FieldElement; 3]> {
        self.tables.round_evals()
    }

    fn bind(&mut self, r: FieldElement) -> Result<()> {
        self.tables.bind(r)
    }

    fn folded(&mut self) -> Result<Vec<[FieldElement; 3]>> {
        self.tables.folded()
    }
}

impl GkrBackend for LocalGkr {
    fn begin_phase1(&mut self, layer: usize, terms: &WeightTerms) -> Result<()> {
        self.weights = self.blocks.iter().map(|b| b.weight_table(layer, terms)).collect();
        self.tables = self.blocks.iter().zip(&self.weights).map(|(b, w)| b.phase1(layer, w)).collect();
        Ok(())
    }

    fn begin_phase2(&mut self, layer: usize, u: &[FieldElement], v_u: FieldElement) -> Result<()> {
        self.tables = self
            .blocks
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| b.phase2(layer, w, u, v_u))
            .collect();
        Ok(())
    }
}

/// Runs the GKR prover against `backend`, whose `2^log_blocks` blocks split
/// every layer by the high-order copy bits. `layer_log_sizes[i]` is the
/// global `log2` size of layer `i`.
pub fn prove_layers<B: GkrBackend + ?Sized>(
    backend: &mut B,
    layer_log_sizes: &[usize],
    log_blocks: usize,
    outputs: &[FieldElement],
    t: &mut Transcript,
) -> Result<(GkrProof, InputClaim)> {
    let depth = layer_log_sizes.len() - 1;
    if outputs.len() != 1 << layer_log_sizes[0] {
        return Err(Error::InvalidArgument("output length does not match the output layer".into()));
    }
    t.append_fes(OUTPUTS_LABEL, outputs);
    let g = t.challenge_fes(OUTPUT_POINT_LABEL, layer_log_sizes[0]);
    let mut claim = fold_evaluate(outputs, &g);
    let mut terms: WeightTerms = vec![(FieldElement::ONE, g)];
    let mut layers = Vec::with_capacity(depth);
    let mut last = None;
    for layer in 0..depth {
        let sn = layer_log_sizes[layer + 1];
        let local = sn - log_blocks;
        let mut rec = RoundRecorder::start(claim, t);
        backend.begin_phase1(layer, &terms)?;
        let [v_u, _, _] = drive_rounds(backend, local, &mut rec, t)?;
        let u = rec.point.clone();
        backend.begin_phase2(layer, &u, v_u)?;
        let [a, v_v, c] = drive_rounds(backend, local, &mut rec, t)?;
        let v = rec.point[sn..].to_vec();
        layers.push(LayerProof {
            sumcheck: SumcheckProof { claimed_sum: claim, rounds: rec.rounds, point: rec.point, final_eval: a * v_v + c },
            v_u,
            v_v,
        });
        t.append_fes(LAYER_CLAIMS_LABEL, &[v_u, v_v]);
        if layer + 1 < depth {
            let alpha = t.challenge_fes(COMBINE_LABEL, 2);
            claim = alpha[0] * v_u + alpha[1] * v_v;
            terms = vec![(alpha[0], u.clone()), (alpha[1], v.clone())];
        }
        last = Some(InputClaim { u, v, v_u, v_v });
    }
    let claim = last.ok_or_else(|| Error::InvalidArgument("circuit has no gate layers".into()))?;
    Ok((GkrProof { outputs: outputs.to_vec(), layers }, claim))
}

fn log_sizes<C: CircuitShape + ?Sized>(c: &C) -> Vec<usize> {
    (0..=c.depth()).map(|i| c.layer_log_size(i)).collect()
}

/// Proves the evaluation of a plain layered circuit on `input`.
pub fn gkr_prove(
    circuit: &LayeredCircuit,
    input: &[FieldElement],
    t: &mut Transcript,
) -> Result<(GkrProof, InputClaim, LayerValues)> {
    let values = circuit.evaluate(input)?;
    let (proof, claim) = prove_evaluated(Arc::new(circuit.clone()), 0, &values, t)?;
    Ok((proof, claim, values))
}

/// Single-process prover for `2^log_copies` copies of `sub`, given the
/// already evaluated (global) layers.
pub fn prove_evaluated(
    sub: Arc<LayeredCircuit>,
    log_copies: usize,
    values: &LayerValues,
    t: &mut Transcript,
) -> Result<(GkrProof, InputClaim)> {
    let sizes: Vec<usize> = (0..=sub.depth()).map(|i| sub.layer_log_size(i) + log_copies).collect();
    let block = CopyBlock { sub, values: values.values.clone(), first_copy: 0, log_copies };
    let mut backend = LocalGkr::new(vec![block]);
    prove_layers(&mut backend, &sizes, 0, values.output(), t)
}

/// Single-process prover for a data-parallel circuit.
pub fn gkr_prove_data_parallel(
    circuit: &DataParallelCircuit,
    input: &[FieldElement],
    t: &mut Transcript,
) -> Result<(GkrProof, InputClaim, LayerValues)> {
    let values = circuit.evaluate(input)?;
    let (proof, claim) = prove_evaluated(Arc::new(circuit.sub().clone()), circuit.log_copies(), &values, t)?;
    Ok((proof, claim, values))
}

/// Checks every layer and returns the input claims left for the oracle.
pub fn verify_layers<C: CircuitShape + ?Sized>(
    circuit: &C,
    claimed_output: &[FieldElement],
    proof: &GkrProof,
    t: &mut Transcript,
) -> Option<InputClaim> {
    let sizes = log_sizes(circuit);
    let depth = circuit.depth();
    if proof.outputs != claimed_output || proof.outputs.len() != 1 << sizes[0] || proof.layers.len() != depth {
        return None;
    }
    t.append_fes(OUTPUTS_LABEL, &proof.outputs);
    let g = t.challenge_fes(OUTPUT_POINT_LABEL, sizes[0]);
    let mut claim = fold_evaluate(&proof.outputs, &g);
    let mut terms: WeightTerms = vec![(FieldElement::ONE, g)];
    let mut last = None;
    for (layer, lp) in proof.layers.iter().enumerate() {
        let sn = sizes[layer + 1];
        let expected = verify_rounds(claim, &lp.sumcheck, 2 * sn, t)?;
        let (u, v) = lp.sumcheck.point.split_at(sn);
        let mut add = FieldElement::ZERO;
        let mut mul = FieldElement::ZERO;
        for (coef, z) in &terms {
            let (a, m) = circuit.wiring_mle(layer, z, u, v).ok()?;
            add += *coef * a;
            mul += *coef * m;
        }
        if expected != add * (lp.v_u + lp.v_v) + mul * lp.v_u * lp.v_v {
            return None;
        }
        t.append_fes(LAYER_CLAIMS_LABEL, &[lp.v_u, lp.v_v]);
        if layer + 1 < depth {
            let alpha = t.challenge_fes(COMBINE_LABEL, 2);
            claim = alpha[0] * lp.v_u + alpha[1] * lp.v_v;
            terms = vec![(alpha[0], u.to_vec()), (alpha[1], v.to_vec())];
        }
        last = Some(InputClaim { u: u.to_vec(), v: v.to_vec(), v_u: lp.v_u, v_v: lp.v_v });
    }
    last
}

pub fn gkr_verify<C: CircuitShape + ?Sized>(
    circuit: &C,
    claimed_output: &[FieldElement],
    proof: &GkrProof,
    oracle: &mut dyn InputOracle,
    t: &mut Transcript,
) -> bool {
    match verify_layers(circuit, claimed_output, proof, t) {
        Some(claim) => oracle.check(&claim, t),
        None => false,
    }
}

impl GkrProof {
    pub fn write(&self, w: &mut Writer) {
        w.fes(&self.outputs).u32(self.layers.len() as u32);
        for l in &self.layers {
            l.sumcheck.write(w);
            w.fe(l.v_u).fe(l.v_v);
        }
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let outputs = r.fes(1 << 24)?;
        let n = r.u32()? as usize;
        if n > 1 << 16 {
            return Err(Error::Decode(format!("{n} GKR layers")));
        }
        let layers = (0..n)
            .map(|_| {
                Ok(LayerProof { sumcheck: SumcheckProof::read(r)?, v_u: r.fe()?, v_v: r.fe()? })
            })
            .collect::<Result<_>>()?;
        Ok(Self { outputs, layers })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let p = Self::read(&mut r)?;
        r.finish()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::tests::{mul_add_circuit, random_circuit};
    use crate::circuit::{replicate, Gate};
    use crate::field::fe;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tr() -> Transcript {
        Transcript::new(b"gkr-test", b"prover")
    }

    fn random_input(rng: &mut ChaCha8Rng, n: usize) -> Vec<FieldElement> {
        (0..n).map(|_| FieldElement::random(rng)).collect()
    }

    #[test]
    fn mul_add_example() {
        let c = mul_add_circuit();
        let input = [fe(2), fe(3), fe(4), fe(1)];
        let (proof, _, values) = gkr_prove(&c, &input, &mut tr()).unwrap();
        assert_eq!(values.output(), &[fe(10)]);
        assert!(gkr_verify(&c, &[fe(10)], &proof, &mut RawInput(&input), &mut tr()));
        assert!(!gkr_verify(&c, &[fe(11)], &proof, &mut RawInput(&input), &mut tr()));
        let mut forged = proof.clone();
        forged.outputs = vec![fe(11)];
        assert!(!gkr_verify(&c, &[fe(11)], &forged, &mut RawInput(&input), &mut tr()));
    }

    #[test]
    fn small_random_circuits_always_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = LayeredCircuit::new(
            vec![vec![Gate::mul(0, 1), Gate::add(2, 3)], vec![Gate::add(0, 1), Gate::mul(1, 2), Gate::mul(2, 3), Gate::add(3, 0)]],
            4,
        )
        .unwrap();
        for _ in 0..100 {
            let input = random_input(&mut rng, 4);
            let (proof, _, values) = gkr_prove(&c, &input, &mut tr()).unwrap();
            assert!(gkr_verify(&c, values.output(), &proof, &mut RawInput(&input), &mut tr()));
        }
    }

    #[test]
    fn completeness_and_layer_claims_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let depth = rng.gen_range(1..=4);
            let c = random_circuit(&mut rng, depth, 6);
            let input = random_input(&mut rng, c.input_size());
            let (proof, claim, values) = gkr_prove(&c, &input, &mut tr()).unwrap();
            for (i, lp) in proof.layers.iter().enumerate() {
                let sn = c.layer_log_size(i + 1);
                let (u, v) = lp.sumcheck.point.split_at(sn);
                assert_eq!(lp.v_u, fold_evaluate(&values.values[i + 1], u));
                assert_eq!(lp.v_v, fold_evaluate(&values.values[i + 1], v));
                assert_eq!(lp.sumcheck.rounds.len(), 2 * sn);
            }
            assert_eq!(claim.v_u, fold_evaluate(&input, &claim.u));
            assert!(gkr_verify(&c, values.output(), &proof, &mut RawInput(&input), &mut tr()));
        }
    }

    #[test]
    fn tampered_layer_claims_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_circuit(&mut rng, 3, 4);
        let input = random_input(&mut rng, c.input_size());
        let (proof, _, values) = gkr_prove(&c, &input, &mut tr()).unwrap();
        for i in 0..proof.layers.len() {
            let mut p = proof.clone();
            p.layers[i].v_u += fe(1);
            assert!(!gkr_verify(&c, values.output(), &p, &mut RawInput(&input), &mut tr()));
        }
        let mut wrong_input = input.clone();
        wrong_input[0] += fe(1);
        assert!(!gkr_verify(&c, values.output(), &proof, &mut RawInput(&wrong_input), &mut tr()));
    }

    #[test]
    fn transcript_determinism_and_identity_binding() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_circuit(&mut rng, 2, 4);
        let input = random_input(&mut rng, c.input_size());
        let a = gkr_prove(&c, &input, &mut tr()).unwrap().0;
        let b = gkr_prove(&c, &input, &mut tr()).unwrap().0;
        assert_eq!(a.to_bytes(), b.to_bytes());
        let mut other = Transcript::new(b"gkr-test", b"someone-else");
        let o = gkr_prove(&c, &input, &mut other).unwrap().0;
        assert_ne!(a.layers[0].sumcheck.point, o.layers[0].sumcheck.point);
        let mut other = Transcript::new(b"gkr-test", b"someone-else");
        assert!(!gkr_verify(&c, &a.outputs, &a, &mut RawInput(&input), &mut other));
    }

    #[test]
    fn data_parallel_prover_matches_flattened_and_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dp = replicate(random_circuit(&mut rng, 3, 3), 8).unwrap();
        let input = random_input(&mut rng, dp.input_size());
        let (proof, _, values) = gkr_prove_data_parallel(&dp, &input, &mut tr()).unwrap();
        let flat = gkr_prove(&dp.flatten(), &input, &mut tr()).unwrap().0;
        assert_eq!(proof, flat);
        assert!(gkr_verify(&dp, values.output(), &proof, &mut RawInput(&input), &mut tr()));

        // Four blocks of two copies each give the same proof.
        let sub = Arc::new(dp.sub().clone());
        let blocks = (0..4)
            .map(|b| {
                let vals = values
                    .values
                    .iter()
                    .map(|layer| {
                        let per = layer.len() / 4;
                        layer[b * per..(b + 1) * per].to_vec()
                    })
                    .collect();
                CopyBlock { sub: sub.clone(), values: vals, first_copy: 2 * b, log_copies: 1 }
            })
            .collect();
        let sizes: Vec<usize> = (0..=dp.depth()).map(|i| dp.layer_log_size(i)).collect();
        let (split, _) = prove_layers(&mut LocalGkr::new(blocks), &sizes, 2, values.output(), &mut tr()).unwrap();
        assert_eq!(split, proof);
    }

    #[test]
    fn serialization_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = random_circuit(&mut rng, 3, 3);
        let input = random_input(&mut rng, c.input_size());
        let proof = gkr_prove(&c, &input, &mut tr()).unwrap().0;
        assert_eq!(GkrProof::from_bytes(&proof.to_bytes()).unwrap(), proof);
    }
}
