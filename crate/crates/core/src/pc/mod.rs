//! Commitments to multilinear polynomials via univariate codewords.
//!
//! The `2^l` hypercube evaluations of `f` are read as the values of a
//! univariate `f_U` on the subgroup `H` (`|H| = 2^l`). The commitment is a
//! Merkle root over `f_U` evaluated on the coset `L` (`|L| = rate * |H|`).
//!
//! To open `f(r) = y`, note that `f(r) = sum_{a in H} f_U(a) w(a)` where `w`
//! interpolates `eq(., r)` over `H`. The prover commits `h` with
//! `f_U w = h Z_H + x g + y / |H|` and `deg g < |H| - 1`, and proves with FRI
//! that `f + b1 h + (b2 + b3 x) g` has degree `< |H|`. At each query the
//! verifier recomputes `g` from the opened `f`, `h` and the public `w`.
//!
//! Commitments are *bundled*: a single tree commits to `N` polynomials
//! (copies), leaf `k` holding the `N` values at the `k`-th point of `L`. One
//! path then opens every copy at once. Copies are combined with powers of a
//! random scalar before FRI, so a bundle needs one FRI run. A plain
//! commitment is a bundle of one.

mod fri;
mod proof;

pub use proof::{ColumnOpening, FriStep, PcOpeningProof, QueryProof};

use crate::error::{invalid, Result};
use crate::field::{
    batch_inverse, eq_table, fft::lagrange_evaluate, fft_evaluate, ifft_interpolate, mle::fold_evaluate,
    EvaluationDomain, FieldElement, MultilinearTable,
};
use crate::iop::Transcript;
use crate::merkle::{hash_leaf, verify_leaf_hash, MerkleRoot, MerkleTree};

const EVALS_LABEL: &[u8] = b"pc/evals";
const BATCH_LABEL: &[u8] = b"pc/batch";
const H_ROOT_LABEL: &[u8] = b"pc/h-root";
const COMBINE_LABEL: &[u8] = b"pc/combine";
const COPIES_LABEL: &[u8] = b"pc/copies";
const QUERY_LABEL: &[u8] = b"pc/query";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PcParams {
    /// Variables per committed polynomial; `|H| = 2^log_size`.
    pub log_size: usize,
    /// `|L| = 2^log_rate * |H|`.
    pub log_rate: usize,
    /// Query positions checked by the verifier.
    pub queries: usize,
}

impl PcParams {
    pub fn new(log_size: usize, log_rate: usize, queries: usize) -> Result<Self> {
        let p = Self { log_size, log_rate, queries };
        p.validate()?;
        Ok(p)
    }

    /// Rate 8 and 16 queries.
    pub fn with_defaults(log_size: usize) -> Result<Self> {
        Self::new(log_size, 3, 16)
    }

    pub fn validate(&self) -> Result<()> {
        if self.log_size == 0 {
            return invalid("committed polynomials need at least one variable");
        }
        if self.log_rate == 0 {
            return invalid("the rate must be at least 2");
        }
        if self.queries == 0 || self.queries > 1 << 12 {
            return invalid(format!("unsupported query count {}", self.queries));
        }
        if self.log_size + self.log_rate > 28 {
            return invalid("evaluation domain too large");
        }
        Ok(())
    }

    pub fn h_domain(&self) -> EvaluationDomain {
        EvaluationDomain::subgroup(self.log_size as u32).expect("validated size")
    }

    pub fn l_domain(&self) -> EvaluationDomain {
        EvaluationDomain::coset((self.log_size + self.log_rate) as u32).expect("validated size")
    }

    pub fn rate(&self) -> usize {
        1 << self.log_rate
    }

    /// Merkle paths in an opening proof: four column openings per query plus
    /// one per committed folding layer.
    pub fn expected_path_count(&self) -> usize {
        self.queries * (4 + self.log_size - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PcCommitment {
    pub root: MerkleRoot,
}

/// Concatenated little-endian values of every copy at one position.
pub fn column_bytes(values: &[FieldElement]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_bytes()).collect()
}

/// The codeword of one copy.
pub fn encode(table: &[FieldElement], params: &PcParams) -> Result<(Vec<FieldElement>, Vec<FieldElement>)> {
    if table.len() != 1 << params.log_size {
        return invalid(format!("table of {} values for a {}-variable commitment", table.len(), params.log_size));
    }
    let coeffs = ifft_interpolate(table, &params.h_domain())?;
    let evals = fft_evaluate(&coeffs, &params.l_domain())?;
    Ok((coeffs, evals))
}

/// The public weight polynomial: `sum_p mu^p eq(., r_p)` on `H`, as
/// coefficients.
pub fn weight_coefficients(points: &[Vec<FieldElement>], mu: FieldElement, params: &PcParams) -> Result<Vec<FieldElement>> {
    Ok(ifft_interpolate(&weight_values(points, mu), &params.h_domain())?)
}

fn weight_values(points: &[Vec<FieldElement>], mu: FieldElement) -> Vec<FieldElement> {
    let mut acc = vec![FieldElement::ZERO; 1 << points[0].len()];
    let mut scale = FieldElement::ONE;
    for p in points {
        for (a, e) in acc.iter_mut().zip(eq_table(p)) {
            *a += scale * e;
        }
        scale *= mu;
    }
    acc
}

/// `h` with `f_U w = h Z_H + (terms of degree < |H|)`, as `|H|` coefficients.
pub fn quotient(f_coeffs: &[FieldElement], w_coeffs: &[FieldElement], params: &PcParams) -> Result<Vec<FieldElement>> {
    let n = 1 << params.log_size;
    let big = EvaluationDomain::subgroup(params.log_size as u32 + 1)?;
    let mut fp = f_coeffs.to_vec();
    fp.resize(2 * n, FieldElement::ZERO);
    let mut wp = w_coeffs.to_vec();
    wp.resize(2 * n, FieldElement::ZERO);
    let fe = fft_evaluate(&fp, &big)?;
    let we = fft_evaluate(&wp, &big)?;
    let prod: Vec<FieldElement> = fe.iter().zip(&we).map(|(a, b)| *a * *b).collect();
    let q = ifft_interpolate(&prod, &big)?;
    Ok(q[n..].to_vec())
}

/// Public per-position data the combined codeword needs.
#[derive(Clone, Copy, Debug)]
pub struct PositionContext {
    pub x: FieldElement,
    pub inv_x: FieldElement,
    pub w: FieldElement,
    pub z_h: FieldElement,
}

/// Random scalars for the combined codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Combiner {
    pub beta: [FieldElement; 3],
    pub gamma: FieldElement,
}

/// `sum_i gamma^i (f_i + b1 h_i + (b2 + b3 x) g_i)` at one position, with
/// `g_i(x) = (f_i w - h_i Z_H - claim_i / |H|) / x`.
pub fn combine_column(
    ctx: &PositionContext,
    f: &[FieldElement],
    h: &[FieldElement],
    claims_over_n: &[FieldElement],
    comb: &Combiner,
) -> FieldElement {
    let mut acc = FieldElement::ZERO;
    let mut scale = FieldElement::ONE;
    let g_weight = comb.beta[1] + comb.beta[2] * ctx.x;
    for ((fi, hi), ci) in f.iter().zip(h).zip(claims_over_n) {
        let g = (*fi * ctx.w - *hi * ctx.z_h - *ci) * ctx.inv_x;
        acc += scale * (*fi + comb.beta[0] * *hi + g_weight * g);
        scale *= comb.gamma;
    }
    acc
}

/// Per-position context on the whole of `L`, given `w`'s coefficients.
pub fn position_contexts(w_coeffs: &[FieldElement], params: &PcParams) -> Result<Vec<PositionContext>> {
    let l = params.l_domain();
    let w = fft_evaluate(w_coeffs, &l)?;
    let xs = l.elements();
    let mut inv = xs.clone();
    batch_inverse(&mut inv);
    let n = 1u64 << params.log_size;
    Ok(xs
        .iter()
        .zip(inv)
        .zip(w)
        .map(|((x, inv_x), w)| PositionContext { x: *x, inv_x, w, z_h: x.pow(n) - FieldElement::ONE })
        .collect())
}

/// Combined claim per copy: `sum_p mu^p y_{p,i}`, divided by `|H|`.
pub fn claims_over_n(evals: &[Vec<FieldElement>], mu: FieldElement, params: &PcParams) -> Vec<FieldElement> {
    let n_inv = FieldElement::new(1 << params.log_size).inverse().unwrap();
    let copies = evals[0].len();
    (0..copies)
        .map(|i| {
            let mut acc = FieldElement::ZERO;
            let mut scale = FieldElement::ONE;
            for e in evals {
                acc += scale * e[i];
                scale *= mu;
            }
            acc * n_inv
        })
        .collect()
}

/// Whoever holds the committed copies.
pub trait PcBackend {
    fn copies(&self) -> usize;
    /// `evals[p][i]`: copy `i` at `points[p]`.
    fn evaluate(&mut self, points: &[Vec<FieldElement>]) -> Result<Vec<Vec<FieldElement>>>;
    /// Commits every copy's quotient for the weight `sum_p mu^p eq(., r_p)`.
    fn commit_quotients(&mut self, points: &[Vec<FieldElement>], mu: FieldElement) -> Result<MerkleRoot>;
    /// The combined codeword on all of `L`.
    fn combined_codeword(&mut self, comb: &Combiner, claims_over_n: &[FieldElement]) -> Result<Vec<FieldElement>>;
    /// `(f, h)` column openings at position `k` of `L`.
    fn open_columns(&mut self, k: usize) -> Result<(ColumnOpening, ColumnOpening)>;
}

/// Prover state for a bundle held in one process.
#[derive(Clone, Debug)]
pub struct PcProverState {
    params: PcParams,
    tables: Vec<Vec<FieldElement>>,
    coeffs: Vec<Vec<FieldElement>>,
    codewords: Vec<Vec<FieldElement>>,
    tree: MerkleTree,
    quotients: Vec<Vec<FieldElement>>,
    quotient_tree: Option<MerkleTree>,
    w_coeffs: Vec<FieldElement>,
}

/// Builds a bundled tree whose leaf `k` is the column of every codeword at `k`.
pub fn column_tree(codewords: &[Vec<FieldElement>]) -> Result<MerkleTree> {
    let len = codewords[0].len();
    let hashes = (0..len)
        .map(|k| {
            let col: Vec<FieldElement> = codewords.iter().map(|c| c[k]).collect();
            hash_leaf(&column_bytes(&col))
        })
        .collect();
    MerkleTree::from_leaf_hashes(hashes)
}

impl PcProverState {
    pub fn params(&self) -> &PcParams {
        &self.params
    }

    pub fn codewords(&self) -> &[Vec<FieldElement>] {
        &self.codewords
    }

    pub fn commitment(&self) -> PcCommitment {
        PcCommitment { root: self.tree.root() }
    }

    fn column(codewords: &[Vec<FieldElement>], tree: &MerkleTree, k: usize) -> Result<ColumnOpening> {
        Ok(ColumnOpening { values: codewords.iter().map(|c| c[k]).collect(), path: tree.path(k)? })
    }

    #[cfg(test)]
    pub(crate) fn with_codewords(
        params: PcParams,
        tables: Vec<Vec<FieldElement>>,
        coeffs: Vec<Vec<FieldElement>>,
        codewords: Vec<Vec<FieldElement>>,
    ) -> Result<Self> {
        let tree = column_tree(&codewords)?;
        Ok(Self { params, tables, coeffs, codewords, tree, quotients: Vec::new(), quotient_tree: None, w_coeffs: Vec::new() })
    }
}

impl PcBackend for PcProverState {
    fn copies(&self) -> usize {
        self.tables.len()
    }

    fn evaluate(&mut self, points: &[Vec<FieldElement>]) -> Result<Vec<Vec<FieldElement>>> {
        Ok(points
            .iter()
            .map(|p| self.tables.iter().map(|t| fold_evaluate(t, p)).collect())
            .collect())
    }

    fn commit_quotients(&mut self, points: &[Vec<FieldElement>], mu: FieldElement) -> Result<MerkleRoot> {
        self.w_coeffs = weight_coefficients(points, mu, &self.params)?;
        let l = self.params.l_domain();
        self.quotients = self
            .coeffs
            .iter()
            .map(|c| {
                let h = quotient(c, &self.w_coeffs, &self.params)?;
                fft_evaluate(&h, &l)
            })
            .collect::<Result<_>>()?;
        let tree = column_tree(&self.quotients)?;
        let root = tree.root();
        self.quotient_tree = Some(tree);
        Ok(root)
    }

    fn combined_codeword(&mut self, comb: &Combiner, claims: &[FieldElement]) -> Result<Vec<FieldElement>> {
        let ctx = position_contexts(&self.w_coeffs, &self.params)?;
        Ok(ctx
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let f: Vec<FieldElement> = self.codewords.iter().map(|v| v[k]).collect();
                let h: Vec<FieldElement> = self.quotients.iter().map(|v| v[k]).collect();
                combine_column(c, &f, &h, claims, comb)
            })
            .collect())
    }

    fn open_columns(&mut self, k: usize) -> Result<(ColumnOpening, ColumnOpening)> {
        let qt = self.quotient_tree.as_ref().expect("quotients committed before opening");
        Ok((Self::column(&self.codewords, &self.tree, k)?, Self::column(&self.quotients, qt, k)?))
    }
}

/// Commits to several tables of `2^log_size` values under one root.
pub fn commit_bundle(tables: Vec<Vec<FieldElement>>, params: &PcParams) -> Result<(PcCommitment, PcProverState)> {
    params.validate()?;
    if tables.is_empty() {
        return invalid("nothing to commit");
    }
    let mut coeffs = Vec::with_capacity(tables.len());
    let mut codewords = Vec::with_capacity(tables.len());
    for t in &tables {
        let (c, e) = encode(t, params)?;
        coeffs.push(c);
        codewords.push(e);
    }
    let tree = column_tree(&codewords)?;
    let state = PcProverState {
        params: *params,
        tables,
        coeffs,
        codewords,
        tree,
        quotients: Vec::new(),
        quotient_tree: None,
        w_coeffs: Vec::new(),
    };
    Ok((state.commitment(), state))
}

fn check_points(points: &[Vec<FieldElement>], params: &PcParams) -> Result<()> {
    if points.is_empty() || points.len() > 2 {
        return invalid("an opening covers one or two points");
    }
    if points.iter().any(|p| p.len() != params.log_size) {
        return invalid(format!("opening points must have {} coordinates", params.log_size));
    }
    Ok(())
}

/// The opening protocol, run against any backend.
pub fn open_with_backend<B: PcBackend + ?Sized>(
    backend: &mut B,
    params: &PcParams,
    points: &[Vec<FieldElement>],
    t: &mut Transcript,
) -> Result<PcOpeningProof> {
    check_points(points, params)?;
    let evals = backend.evaluate(points)?;
    for e in &evals {
        t.append_fes(EVALS_LABEL, e);
    }
    let mu = if points.len() == 2 { t.challenge_fe(BATCH_LABEL) } else { FieldElement::ZERO };
    let h_root = backend.commit_quotients(points, mu)?;
    t.append_root(H_ROOT_LABEL, &h_root);
    let beta = t.challenge_fes(COMBINE_LABEL, 3);
    let comb = Combiner { beta: [beta[0], beta[1], beta[2]], gamma: t.challenge_fe(COPIES_LABEL) };
    let claims = claims_over_n(&evals, mu, params);
    let codeword = backend.combined_codeword(&comb, &claims)?;
    let l = params.l_domain();
    let fri = fri::commit(codeword, &l, params.log_size, t)?;
    let half = l.order / 2;
    let mut queries = Vec::with_capacity(params.queries);
    for _ in 0..params.queries {
        let k = t.challenge_index(QUERY_LABEL, half);
        let (f0, h0) = backend.open_columns(k)?;
        let (f1, h1) = backend.open_columns(k + half)?;
        queries.push(QueryProof { f: [f0, f1], h: [h0, h1], fri: fri.open(k)? });
    }
    Ok(PcOpeningProof { evals, h_root, fri_roots: fri.roots, final_value: fri.final_value, queries })
}

/// Verifies a bundled opening of `copies` polynomials at `points`. On success
/// `proof.evals[p][i]` is copy `i` evaluated at `points[p]`.
pub fn verify_bundle(
    com: &PcCommitment,
    params: &PcParams,
    copies: usize,
    points: &[Vec<FieldElement>],
    proof: &PcOpeningProof,
    t: &mut Transcript,
) -> bool {
    if params.validate().is_err() || check_points(points, params).is_err() || copies == 0 {
        return false;
    }
    let rounds = params.log_size;
    if proof.evals.len() != points.len()
        || proof.evals.iter().any(|e| e.len() != copies)
        || proof.fri_roots.len() != rounds - 1
        || proof.queries.len() != params.queries
    {
        return false;
    }
    for e in &proof.evals {
        t.append_fes(EVALS_LABEL, e);
    }
    let mu = if points.len() == 2 { t.challenge_fe(BATCH_LABEL) } else { FieldElement::ZERO };
    t.append_root(H_ROOT_LABEL, &proof.h_root);
    let beta = t.challenge_fes(COMBINE_LABEL, 3);
    let comb = Combiner { beta: [beta[0], beta[1], beta[2]], gamma: t.challenge_fe(COPIES_LABEL) };
    let mut alphas = Vec::with_capacity(rounds);
    for i in 0..rounds {
        alphas.push(t.challenge_fe(fri::FOLD_LABEL));
        if i + 1 < rounds {
            t.append_root(fri::ROOT_LABEL, &proof.fri_roots[i]);
        }
    }
    t.append_fe(fri::FINAL_LABEL, proof.final_value);

    let claims = claims_over_n(&proof.evals, mu, params);
    let weights = weight_values(points, mu);
    let h_dom = params.h_domain();
    let l = params.l_domain();
    let half = l.order / 2;
    let n = 1u64 << params.log_size;
    let column_ok = |c: &ColumnOpening, k: usize, root: &MerkleRoot| {
        c.values.len() == copies
            && c.path.leaf_index == k as u64
            && verify_leaf_hash(&c.path, &hash_leaf(&column_bytes(&c.values)), root)
    };
    for q in &proof.queries {
        let k = t.challenge_index(QUERY_LABEL, half);
        let mut combined = [FieldElement::ZERO; 2];
        for side in 0..2 {
            let pos = k + side * half;
            if !column_ok(&q.f[side], pos, &com.root) || !column_ok(&q.h[side], pos, &proof.h_root) {
                return false;
            }
            let x = l.element(pos);
            let ctx = PositionContext {
                x,
                inv_x: x.inverse().unwrap(),
                w: lagrange_evaluate(&weights, &h_dom, x),
                z_h: x.pow(n) - FieldElement::ONE,
            };
            combined[side] = combine_column(&ctx, &q.f[side].values, &q.h[side].values, &claims, &comb);
        }
        if !fri::verify_query(&l, &alphas, &proof.fri_roots, proof.final_value, k, combined[0], combined[1], &q.fri) {
            return false;
        }
    }
    true
}

pub fn pc_commit(table: &MultilinearTable, params: &PcParams) -> Result<(PcCommitment, PcProverState)> {
    if table.num_vars() != params.log_size {
        return invalid(format!("{}-variable table for {}-variable parameters", table.num_vars(), params.log_size));
    }
    commit_bundle(vec![table.evals().to_vec()], params)
}

pub fn pc_open(state: &mut PcProverState, r: &[FieldElement], t: &mut Transcript) -> Result<(FieldElement, PcOpeningProof)> {
    let params = state.params;
    let proof = open_with_backend(state, &params, &[r.to_vec()], t)?;
    Ok((proof.evals[0][0], proof))
}

pub fn pc_batch_open(
    state: &mut PcProverState,
    u: &[FieldElement],
    v: &[FieldElement],
    t: &mut Transcript,
) -> Result<(FieldElement, FieldElement, PcOpeningProof)> {
    let params = state.params;
    let proof = open_with_backend(state, &params, &[u.to_vec(), v.to_vec()], t)?;
    Ok((proof.evals[0][0], proof.evals[1][0], proof))
}

pub fn pc_verify(
    com: &PcCommitment,
    r: &[FieldElement],
    y: FieldElement,
    proof: &PcOpeningProof,
    params: &PcParams,
    t: &mut Transcript,
) -> bool {
    proof.evals.len() == 1
        && proof.evals[0] == [y]
        && verify_bundle(com, params, 1, &[r.to_vec()], proof, t)
}

pub fn pc_batch_verify(
    com: &PcCommitment,
    u: &[FieldElement],
    v: &[FieldElement],
    y_u: FieldElement,
    y_v: FieldElement,
    proof: &PcOpeningProof,
    params: &PcParams,
    t: &mut Transcript,
) -> bool {
    proof.evals.len() == 2
        && proof.evals[0] == [y_u]
        && proof.evals[1] == [y_v]
        && verify_bundle(com, params, 1, &[u.to_vec(), v.to_vec()], proof, t)
}

/// Baseline without bundling: every copy committed and opened on its own, so
/// each opened position costs one path per copy.
pub mod naive {
    use super::*;

    pub fn commit_each(tables: &[Vec<FieldElement>], params: &PcParams) -> Result<Vec<(PcCommitment, PcProverState)>> {
        tables.iter().map(|t| commit_bundle(vec![t.clone()], params)).collect()
    }

    pub fn open_each(
        states: &mut [(PcCommitment, PcProverState)],
        points: &[Vec<FieldElement>],
        t: &mut Transcript,
    ) -> Result<Vec<PcOpeningProof>> {
        states
            .iter_mut()
            .map(|(_, s)| {
                let params = s.params;
                open_with_backend(s, &params, points, t)
            })
            .collect()
    }

    pub fn verify_each(
        coms: &[PcCommitment],
        params: &PcParams,
        points: &[Vec<FieldElement>],
        proofs: &[PcOpeningProof],
        t: &mut Transcript,
    ) -> bool {
        coms.len() == proofs.len()
            && coms.iter().zip(proofs).all(|(c, p)| verify_bundle(c, params, 1, points, p, t))
    }

    /// Paths into witness commitments per opened position: one per copy.
    pub fn witness_paths_per_position(proofs: &[PcOpeningProof]) -> usize {
        proofs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fe, fft::horner, mle_evaluate};
    use crate::merkle::mt_commit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tr() -> Transcript {
        Transcript::new(b"pc-test", b"prover")
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<FieldElement> {
        (0..n).map(|_| FieldElement::random(rng)).collect()
    }

    fn table(v: Vec<FieldElement>) -> MultilinearTable {
        MultilinearTable::new(v).unwrap()
    }

    #[test]
    fn zero_and_constant_tables() {
        let params = PcParams::new(3, 2, 4).unwrap();
        let (com, state) = pc_commit(&table(vec![fe(0); 8]), &params).unwrap();
        assert!(state.codewords()[0].iter().all(|v| v.is_zero()));
        let zero_leaves: Vec<[u8; 8]> = vec![[0u8; 8]; 32];
        assert_eq!(com.root, mt_commit(&zero_leaves).unwrap());
        let (_, state) = pc_commit(&table(vec![fe(5); 8]), &params).unwrap();
        assert!(state.codewords()[0].iter().all(|v| *v == fe(5)));
    }

    #[test]
    fn codeword_matches_naive_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = PcParams::new(3, 2, 4).unwrap();
        let vals = random_vec(&mut rng, 8);
        let (_, state) = pc_commit(&table(vals.clone()), &params).unwrap();
        // Naive oracle: interpolate through (g^k, vals[k]) by solving with
        // Lagrange at each point of L.
        let h = params.h_domain();
        for (k, x) in params.l_domain().elements().into_iter().enumerate() {
            let mut acc = FieldElement::ZERO;
            for (i, hi) in h.elements().iter().enumerate() {
                let mut basis = FieldElement::ONE;
                for (j, hj) in h.elements().iter().enumerate() {
                    if i != j {
                        basis *= (x - *hj) / (*hi - *hj);
                    }
                }
                acc += vals[i] * basis;
            }
            assert_eq!(state.codewords()[0][k], acc);
        }
        assert_eq!(state.codewords()[0].len(), 32);
    }

    #[test]
    fn quotient_decomposition_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = PcParams::new(3, 1, 1).unwrap();
        let vals = random_vec(&mut rng, 8);
        let (f, _) = encode(&vals, &params).unwrap();
        let r = random_vec(&mut rng, 3);
        let w = weight_coefficients(&[r.clone()], fe(0), &params).unwrap();
        let h = quotient(&f, &w, &params).unwrap();
        let y = mle_evaluate(&table(vals), &r).unwrap();
        let x = fe(123456789);
        let lhs = horner(&f, x) * horner(&w, x);
        let zh = x.pow(8) - fe(1);
        let rem = lhs - horner(&h, x) * zh;
        // rem(x) = y/|H| + x g(x) with g of degree < 7: check via the constant term.
        let rem_coeffs: Vec<FieldElement> = {
            let big = EvaluationDomain::subgroup(4).unwrap();
            let mut fp = f.clone();
            fp.resize(16, fe(0));
            let mut wp = w.clone();
            wp.resize(16, fe(0));
            let prod: Vec<_> = fft_evaluate(&fp, &big)
                .unwrap()
                .iter()
                .zip(fft_evaluate(&wp, &big).unwrap())
                .map(|(a, b)| *a * b)
                .collect();
            let q = ifft_interpolate(&prod, &big).unwrap();
            (0..8).map(|j| q[j] + q[j + 8]).collect()
        };
        assert_eq!(rem_coeffs[0], y / fe(8));
        assert_eq!(horner(&rem_coeffs, x), rem);
    }

    #[test]
    fn open_boolean_and_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ell in 1..=4 {
            let params = PcParams::new(ell, 2, 6).unwrap();
            let vals = random_vec(&mut rng, 1 << ell);
            let t0 = table(vals.clone());
            let (com, mut state) = pc_commit(&t0, &params).unwrap();
            let idx = rng.gen_range(0..1 << ell);
            let boolean: Vec<_> = (0..ell).map(|j| fe(((idx >> j) & 1) as u64)).collect();
            let (y, proof) = pc_open(&mut state, &boolean, &mut tr()).unwrap();
            assert_eq!(y, vals[idx]);
            assert!(pc_verify(&com, &boolean, y, &proof, &params, &mut tr()));
            assert_eq!(proof.path_count(), params.expected_path_count());

            let r = random_vec(&mut rng, ell);
            let (y, proof) = pc_open(&mut state, &r, &mut tr()).unwrap();
            assert_eq!(y, mle_evaluate(&t0, &r).unwrap());
            assert!(pc_verify(&com, &r, y, &proof, &params, &mut tr()));
            assert!(!pc_verify(&com, &r, y + fe(1), &proof, &params, &mut tr()));
            let mut forged = proof.clone();
            forged.evals[0][0] += fe(1);
            assert!(!pc_verify(&com, &r, y + fe(1), &forged, &params, &mut tr()));
        }
    }

    #[test]
    fn completeness_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for ell in 1..=6 {
            for log_rate in [1, 2] {
                let params = PcParams::new(ell, log_rate, 4).unwrap();
                for _ in 0..100 {
                    let t0 = table(random_vec(&mut rng, 1 << ell));
                    let (com, mut state) = pc_commit(&t0, &params).unwrap();
                    let r = random_vec(&mut rng, ell);
                    let (y, proof) = pc_open(&mut state, &r, &mut tr()).unwrap();
                    assert!(pc_verify(&com, &r, y, &proof, &params, &mut tr()));
                }
            }
        }
    }

    #[test]
    fn batch_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = PcParams::new(3, 2, 8).unwrap();
        let t0 = table(random_vec(&mut rng, 8));
        let (com, mut state) = pc_commit(&t0, &params).unwrap();
        let (u, v) = (random_vec(&mut rng, 3), random_vec(&mut rng, 3));
        let (yu, yv, proof) = pc_batch_open(&mut state, &u, &v, &mut tr()).unwrap();
        assert_eq!(yu, mle_evaluate(&t0, &u).unwrap());
        assert_eq!(yv, mle_evaluate(&t0, &v).unwrap());
        assert!(pc_batch_verify(&com, &u, &v, yu, yv, &proof, &params, &mut tr()));
        assert!(!pc_batch_verify(&com, &u, &v, yu, yv + fe(1), &proof, &params, &mut tr()));
        let mut forged = proof.clone();
        forged.evals[1][0] += fe(1);
        assert!(!pc_batch_verify(&com, &u, &v, yu, yv + fe(1), &forged, &params, &mut tr()));

        let (yu2, yv2, same) = pc_batch_open(&mut state, &u, &u, &mut tr()).unwrap();
        assert_eq!((yu2, yv2), (yu, yu));
        let (y1, _) = pc_open(&mut state, &u, &mut tr()).unwrap();
        assert_eq!(y1, yu2);
        assert!(pc_batch_verify(&com, &u, &u, yu, yu, &same, &params, &mut tr()));
    }

    #[test]
    fn corrupted_opening_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = PcParams::new(4, 2, 8).unwrap();
        let t0 = table(random_vec(&mut rng, 16));
        let (com, mut state) = pc_commit(&t0, &params).unwrap();
        let r = random_vec(&mut rng, 4);
        let (y, proof) = pc_open(&mut state, &r, &mut tr()).unwrap();
        let mut p = proof.clone();
        p.queries[3].f[0].values[0] += fe(1);
        assert!(!pc_verify(&com, &r, y, &p, &params, &mut tr()));
        let mut p = proof.clone();
        p.queries[0].fri[1].pair[1] += fe(1);
        assert!(!pc_verify(&com, &r, y, &p, &params, &mut tr()));
        let mut p = proof.clone();
        p.final_value += fe(1);
        assert!(!pc_verify(&com, &r, y, &p, &params, &mut tr()));
        let bytes = proof.to_bytes();
        assert_eq!(PcOpeningProof::from_bytes(&bytes).unwrap(), proof);
    }

    #[test]
    fn high_degree_commitment_rejected() {
        // A cheating prover commits to a codeword of degree |H| and runs the
        // honest opening on it. FRI catches it unless every query misses.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = PcParams::new(3, 1, 8).unwrap();
        let mut accepted = 0;
        let trials = 1000;
        for trial in 0..trials {
            let mut coeffs = random_vec(&mut rng, 9);
            coeffs[8] = FieldElement::random(&mut rng) + fe(1);
            let mut padded = coeffs.clone();
            padded.resize(16, fe(0));
            let codeword = fft_evaluate(&padded, &params.l_domain()).unwrap();
            let honest = coeffs[..8].to_vec();
            let on_h = fft_evaluate(&honest, &params.h_domain()).unwrap();
            let mut state =
                PcProverState::with_codewords(params, vec![on_h], vec![honest], vec![codeword]).unwrap();
            let com = state.commitment();
            let r = random_vec(&mut rng, 3);
            let id = format!("cheater-{trial}");
            let mut t = Transcript::new(b"pc-cheat", id.as_bytes());
            let (y, proof) = pc_open(&mut state, &r, &mut t).unwrap();
            let mut t = Transcript::new(b"pc-cheat", id.as_bytes());
            if pc_verify(&com, &r, y, &proof, &params, &mut t) {
                accepted += 1;
            }
        }
        // Acceptance needs all 8 queries to miss; (1/2 + small)^8 < 1%.
        assert!(accepted <= trials / 100, "{accepted} of {trials} accepted");
    }

    #[test]
    fn bundle_opens_every_copy_with_one_path_per_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = PcParams::new(3, 3, 16).unwrap();
        for copies in [1usize, 2, 4, 8] {
            let tables: Vec<_> = (0..copies).map(|_| random_vec(&mut rng, 8)).collect();
            let (com, mut state) = commit_bundle(tables.clone(), &params).unwrap();
            let points = vec![random_vec(&mut rng, 3), random_vec(&mut rng, 3)];
            let proof = open_with_backend(&mut state, &params, &points, &mut tr()).unwrap();
            for (p, pt) in points.iter().enumerate() {
                for (i, t) in tables.iter().enumerate() {
                    assert_eq!(proof.evals[p][i], fold_evaluate(t, pt));
                }
            }
            assert!(verify_bundle(&com, &params, copies, &points, &proof, &mut tr()));
            assert!(!verify_bundle(&com, &params, copies * 2, &points, &proof, &mut tr()));
            assert_eq!(proof.path_count(), params.expected_path_count());

            let mut naive_states = naive::commit_each(&tables, &params).unwrap();
            let proofs = naive::open_each(&mut naive_states, &points, &mut tr()).unwrap();
            let coms: Vec<_> = naive_states.iter().map(|(c, _)| *c).collect();
            assert!(naive::verify_each(&coms, &params, &points, &proofs, &mut tr()));
            assert_eq!(naive::witness_paths_per_position(&proofs), copies);
            assert_eq!(proof.witness_paths_per_position(), 1);

            if copies > 1 {
                let mut swapped = tables.clone();
                swapped.swap(0, 1);
                assert_ne!(commit_bundle(swapped, &params).unwrap().0, com);
            }
        }
    }
}
