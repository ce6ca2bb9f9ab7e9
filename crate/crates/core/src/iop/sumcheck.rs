//! Sumcheck for sums of the form `sum_b A(b) * B(b) + C(b)` with `A`, `B`, `C`
//! multilinear, which covers every sum the GKR layers need.

use super::Transcript;
use crate::codec::{Reader, Writer};
use crate::error::{invalid, Result};
use crate::field::{mle::fold_evaluate, FieldElement};

const ROUND_LABEL: &[u8] = b"sumcheck/round";
const CHALLENGE_LABEL: &[u8] = b"sumcheck/challenge";
const CLAIM_LABEL: &[u8] = b"sumcheck/claim";

/// Bookkeeping tables for `A * B + C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSum {
    pub a: Vec<FieldElement>,
    pub b: Vec<FieldElement>,
    pub c: Vec<FieldElement>,
}

impl ProductSum {
    pub fn new(a: Vec<FieldElement>, b: Vec<FieldElement>, c: Vec<FieldElement>) -> Result<Self> {
        if !a.len().is_power_of_two() || a.len() != b.len() || a.len() != c.len() {
            return invalid(format!(
                "tables must share a power-of-two length (got {}, {}, {})",
                a.len(),
                b.len(),
                c.len()
            ));
        }
        Ok(Self { a, b, c })
    }

    /// `A` alone (`B = 1`, `C = 0`).
    pub fn multilinear(a: Vec<FieldElement>) -> Result<Self> {
        let n = a.len();
        Self::new(a, vec![FieldElement::ONE; n], vec![FieldElement::ZERO; n])
    }

    pub fn from_folded(folded: &[[FieldElement; 3]]) -> Result<Self> {
        Self::new(
            folded.iter().map(|f| f[0]).collect(),
            folded.iter().map(|f| f[1]).collect(),
            folded.iter().map(|f| f[2]).collect(),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.a.len().trailing_zeros() as usize
    }

    pub fn sum(&self) -> FieldElement {
        self.a
            .iter()
            .zip(&self.b)
            .zip(&self.c)
            .map(|((a, b), c)| *a * *b + *c)
            .sum()
    }

    /// `A(r) * B(r) + C(r)`.
    pub fn evaluate(&self, point: &[FieldElement]) -> FieldElement {
        fold_evaluate(&self.a, point) * fold_evaluate(&self.b, point) + fold_evaluate(&self.c, point)
    }

    /// The current round polynomial at 0, 1 and 2, summing over the
    /// remaining variables.
    pub fn round_evals(&self) -> [FieldElement; 3] {
        let mut s = [FieldElement::ZERO; 3];
        for k in 0..self.a.len() / 2 {
            let (a0, a1) = (self.a[2 * k], self.a[2 * k + 1]);
            let (b0, b1) = (self.b[2 * k], self.b[2 * k + 1]);
            let (c0, c1) = (self.c[2 * k], self.c[2 * k + 1]);
            let (a2, b2, c2) = (a1 + a1 - a0, b1 + b1 - b0, c1 + c1 - c0);
            s[0] += a0 * b0 + c0;
            s[1] += a1 * b1 + c1;
            s[2] += a2 * b2 + c2;
        }
        s
    }

    /// Fixes the lowest variable to `r`.
    pub fn bind(&mut self, r: FieldElement) {
        for t in [&mut self.a, &mut self.b, &mut self.c] {
            let half = t.len() / 2;
            for k in 0..half {
                let (lo, hi) = (t[2 * k], t[2 * k + 1]);
                t[k] = lo + r * (hi - lo);
            }
            t.truncate(half);
        }
    }

    /// `(A, B, C)` once every variable is bound.
    pub fn folded(&self) -> [FieldElement; 3] {
        debug_assert_eq!(self.a.len(), 1);
        [self.a[0], self.b[0], self.c[0]]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumcheckProof {
    pub claimed_sum: FieldElement,
    /// Coefficients `(c0, c1, c2)` of each round polynomial.
    pub rounds: Vec<[FieldElement; 3]>,
    /// The challenges, one per round.
    pub point: Vec<FieldElement>,
    /// `f(point)`.
    pub final_eval: FieldElement,
}

impl SumcheckProof {
    pub fn num_vars(&self) -> usize {
        self.rounds.len()
    }

    pub fn write(&self, w: &mut Writer) {
        w.fe(self.claimed_sum).u32(self.rounds.len() as u32);
        for r in &self.rounds {
            for c in r {
                w.fe(*c);
            }
        }
        for p in &self.point {
            w.fe(*p);
        }
        w.fe(self.final_eval);
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let claimed_sum = r.fe()?;
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(crate::Error::Decode(format!("{n} sumcheck rounds")));
        }
        let rounds = (0..n)
            .map(|_| Ok([r.fe()?, r.fe()?, r.fe()?]))
            .collect::<Result<Vec<_>>>()?;
        let point = (0..n).map(|_| r.fe()).collect::<Result<Vec<_>>>()?;
        Ok(Self { claimed_sum, rounds, point, final_eval: r.fe()? })
    }
}

/// Coefficients of the degree-2 polynomial through `(0, s0), (1, s1), (2, s2)`.
pub fn round_coefficients(evals: [FieldElement; 3]) -> [FieldElement; 3] {
    let [s0, s1, s2] = evals;
    let half = FieldElement::TWO.inverse().unwrap();
    let c2 = (s2 - s1 - s1 + s0) * half;
    let c1 = s1 - s0 - c2;
    [s0, c1, c2]
}

fn eval_round(c: &[FieldElement; 3], x: FieldElement) -> FieldElement {
    c[0] + x * (c[1] + x * c[2])
}

/// Whoever holds the bookkeeping tables: a single prover or a cluster whose
/// members each hold a contiguous block of the hypercube (high-order bits
/// select the block).
pub trait SumcheckBackend {
    /// Round polynomial evaluations at 0, 1, 2, summed over all holders.
    fn round_evals(&mut self) -> Result<[FieldElement; 3]>;
    /// Binds the lowest unbound variable.
    fn bind(&mut self, r: FieldElement) -> Result<()>;
    /// Per-holder `(A, B, C)` after all local variables are bound, in block
    /// order.
    fn folded(&mut self) -> Result<Vec<[FieldElement; 3]>>;
}

impl SumcheckBackend for ProductSum {
    fn round_evals(&mut self) -> Result<[FieldElement; 3]> {
        Ok(ProductSum::round_evals(self))
    }

    fn bind(&mut self, r: FieldElement) -> Result<()> {
        ProductSum::bind(self, r);
        Ok(())
    }

    fn folded(&mut self) -> Result<Vec<[FieldElement; 3]>> {
        Ok(vec![ProductSum::folded(self)])
    }
}

impl SumcheckBackend for Vec<ProductSum> {
    fn round_evals(&mut self) -> Result<[FieldElement; 3]> {
        let mut s = [FieldElement::ZERO; 3];
        for block in self.iter() {
            let e = block.round_evals();
            for (acc, v) in s.iter_mut().zip(e) {
                *acc += v;
            }
        }
        Ok(s)
    }

    fn bind(&mut self, r: FieldElement) -> Result<()> {
        self.iter_mut().for_each(|b| b.bind(r));
        Ok(())
    }

    fn folded(&mut self) -> Result<Vec<[FieldElement; 3]>> {
        Ok(self.iter().map(|b| b.folded()).collect())
    }
}

/// Accumulates round messages and draws challenges.
pub(crate) struct RoundRecorder {
    pub rounds: Vec<[FieldElement; 3]>,
    pub point: Vec<FieldElement>,
}

impl RoundRecorder {
    pub fn start(claim: FieldElement, t: &mut Transcript) -> Self {
        t.append_fe(CLAIM_LABEL, claim);
        Self { rounds: Vec::new(), point: Vec::new() }
    }

    pub fn record(&mut self, evals: [FieldElement; 3], t: &mut Transcript) -> FieldElement {
        let coeffs = round_coefficients(evals);
        t.append_fes(ROUND_LABEL, &coeffs);
        let r = t.challenge_fe(CHALLENGE_LABEL);
        self.rounds.push(coeffs);
        self.point.push(r);
        r
    }
}

/// Runs `local_rounds` rounds against `backend`, then finishes the remaining
/// block-index rounds on the folded per-block values. Returns the final
/// `(A, B, C)`.
pub(crate) fn drive_rounds<B: SumcheckBackend + ?Sized>(
    backend: &mut B,
    local_rounds: usize,
    rec: &mut RoundRecorder,
    t: &mut Transcript,
) -> Result<[FieldElement; 3]> {
    for _ in 0..local_rounds {
        let evals = backend.round_evals()?;
        let r = rec.record(evals, t);
        backend.bind(r)?;
    }
    let mut tail = ProductSum::from_folded(&backend.folded()?)?;
    for _ in 0..tail.num_vars() {
        let r = rec.record(tail.round_evals(), t);
        tail.bind(r);
    }
    Ok(tail.folded())
}

/// Proves `sum_b f(b)` for `f` spread over `backend`'s blocks, each holding
/// `local_rounds` variables. With a single [`ProductSum`] this is the plain
/// sumcheck prover.
pub fn prove_with_backend<B: SumcheckBackend + ?Sized>(
    backend: &mut B,
    local_rounds: usize,
    t: &mut Transcript,
) -> Result<SumcheckProof> {
    // The claim is the sum of the first round polynomial over {0, 1}; with no
    // local rounds it is the sum of the folded block values.
    let (claim, first) = if local_rounds > 0 {
        let e = backend.round_evals()?;
        (e[0] + e[1], Some(e))
    } else {
        (ProductSum::from_folded(&backend.folded()?)?.sum(), None)
    };
    let mut rec = RoundRecorder::start(claim, t);
    let mut remaining = local_rounds;
    if let Some(e) = first {
        let r = rec.record(e, t);
        backend.bind(r)?;
        remaining -= 1;
    }
    let [a, b, c] = drive_rounds(backend, remaining, &mut rec, t)?;
    Ok(SumcheckProof { claimed_sum: claim, rounds: rec.rounds, point: rec.point, final_eval: a * b + c })
}

pub fn sumcheck_prove(f: ProductSum, t: &mut Transcript) -> SumcheckProof {
    let mut f = f;
    let n = f.num_vars();
    prove_with_backend(&mut f, n, t).expect("local sumcheck cannot fail")
}

/// Replays the rounds. On success returns the value `f(point)` must take.
/// Also checks that the redundant `point` and `final_eval` fields agree with
/// the replay.
pub(crate) fn verify_rounds(
    claim: FieldElement,
    proof: &SumcheckProof,
    num_vars: usize,
    t: &mut Transcript,
) -> Option<FieldElement> {
    if proof.claimed_sum != claim || proof.rounds.len() != num_vars || proof.point.len() != num_vars {
        return None;
    }
    t.append_fe(CLAIM_LABEL, claim);
    let mut expected = claim;
    for (coeffs, sent) in proof.rounds.iter().zip(&proof.point) {
        if coeffs[0] + coeffs[0] + coeffs[1] + coeffs[2] != expected {
            return None;
        }
        t.append_fes(ROUND_LABEL, coeffs);
        let r = t.challenge_fe(CHALLENGE_LABEL);
        if r != *sent {
            return None;
        }
        expected = eval_round(coeffs, r);
    }
    (proof.final_eval == expected).then_some(expected)
}

/// Verifies `proof` for the claim `claim`; `oracle` evaluates `f` at the
/// final point.
pub fn sumcheck_verify(
    claim: FieldElement,
    proof: &SumcheckProof,
    num_vars: usize,
    oracle: impl FnOnce(&[FieldElement]) -> FieldElement,
    t: &mut Transcript,
) -> bool {
    match verify_rounds(claim, proof, num_vars, t) {
        Some(v) => oracle(&proof.point) == v,
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fe, MultilinearTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tr() -> Transcript {
        Transcript::new(b"sumcheck-test", b"prover")
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<FieldElement> {
        (0..n).map(|_| FieldElement::random(rng)).collect()
    }

    #[test]
    fn coefficients_interpolate() {
        let c = round_coefficients([fe(3), fe(5), fe(11)]);
        for (x, v) in [(0, 3), (1, 5), (2, 11)] {
            assert_eq!(eval_round(&c, fe(x)), fe(v));
        }
    }

    #[test]
    fn small_multilinear() {
        let f = ProductSum::multilinear(vec![fe(1), fe(2), fe(3), fe(4)]).unwrap();
        let table = MultilinearTable::new(f.a.clone()).unwrap();
        let proof = sumcheck_prove(f, &mut tr());
        assert_eq!(proof.claimed_sum, fe(10));
        assert!(sumcheck_verify(fe(10), &proof, 2, |r| table.evaluate(r).unwrap(), &mut tr()));
        assert!(!sumcheck_verify(fe(11), &proof, 2, |r| table.evaluate(r).unwrap(), &mut tr()));
    }

    #[test]
    fn zero_table_has_zero_rounds() {
        let f = ProductSum::multilinear(vec![fe(0); 8]).unwrap();
        let proof = sumcheck_prove(f, &mut tr());
        assert_eq!(proof.claimed_sum, fe(0));
        assert!(proof.rounds.iter().flatten().all(|c| c.is_zero()));
        assert_eq!(proof.rounds.len(), 3);
    }

    #[test]
    fn product_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_vec(&mut rng, 8);
        let b = random_vec(&mut rng, 8);
        let brute: FieldElement = a.iter().zip(&b).map(|(x, y)| *x * *y).sum();
        let f = ProductSum::new(a.clone(), b.clone(), vec![fe(0); 8]).unwrap();
        let proof = sumcheck_prove(f.clone(), &mut tr());
        assert_eq!(proof.claimed_sum, brute);
        let oracle = |r: &[FieldElement]| fold_evaluate(&a, r) * fold_evaluate(&b, r);
        assert!(sumcheck_verify(brute, &proof, 3, oracle, &mut tr()));
        assert_eq!(proof.final_eval, f.evaluate(&proof.point));
    }

    #[test]
    fn tampered_coefficients_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..200 {
            let ell = rng.gen_range(1..6);
            let f = ProductSum::new(
                random_vec(&mut rng, 1 << ell),
                random_vec(&mut rng, 1 << ell),
                random_vec(&mut rng, 1 << ell),
            )
            .unwrap();
            let id = format!("prover-{trial}");
            let mut t = Transcript::new(b"tamper", id.as_bytes());
            let mut proof = sumcheck_prove(f.clone(), &mut t);
            let claim = proof.claimed_sum;
            let (i, j) = (rng.gen_range(0..ell), rng.gen_range(0..3));
            proof.rounds[i][j] += FieldElement::random(&mut rng);
            let mut t = Transcript::new(b"tamper", id.as_bytes());
            assert!(!sumcheck_verify(claim, &proof, ell, |r| f.evaluate(r), &mut t));
        }
    }

    #[test]
    fn split_backend_matches_single_prover() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ProductSum::new(random_vec(&mut rng, 64), random_vec(&mut rng, 64), random_vec(&mut rng, 64)).unwrap();
        let whole = sumcheck_prove(f.clone(), &mut tr());
        for blocks in [1usize, 2, 4, 8, 64] {
            let size = 64 / blocks;
            let mut parts: Vec<ProductSum> = (0..blocks)
                .map(|i| {
                    let r = i * size..(i + 1) * size;
                    ProductSum::new(f.a[r.clone()].to_vec(), f.b[r.clone()].to_vec(), f.c[r].to_vec()).unwrap()
                })
                .collect();
            let split = prove_with_backend(&mut parts, size.trailing_zeros() as usize, &mut tr()).unwrap();
            assert_eq!(split, whole, "blocks={blocks}");
        }
    }

    #[test]
    fn serialization_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let proof = sumcheck_prove(ProductSum::multilinear(random_vec(&mut rng, 16)).unwrap(), &mut tr());
        let mut w = Writer::new();
        proof.write(&mut w);
        let bytes = w.finish();
        let mut r = Reader::new(&bytes);
        assert_eq!(SumcheckProof::read(&mut r).unwrap(), proof);
        r.finish().unwrap();
    }
}
