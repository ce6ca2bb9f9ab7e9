//! Folding commitments proving that a codeword on `L` has degree `< |H|`.

use super::proof::FriStep;
use crate::field::{batch_inverse, EvaluationDomain, FieldElement};
use crate::iop::Transcript;
use crate::merkle::{verify_leaf_hash, hash_leaf, MerkleRoot, MerkleTree};
use crate::error::Result;

pub(crate) const FOLD_LABEL: &[u8] = b"pc/fri-fold";
pub(crate) const ROOT_LABEL: &[u8] = b"pc/fri-root";
pub(crate) const FINAL_LABEL: &[u8] = b"pc/fri-final";

/// `(a + b) / 2 + alpha (a - b) / (2x)` for `a = F(x)`, `b = F(-x)`.
pub(crate) fn fold_pair(a: FieldElement, b: FieldElement, alpha: FieldElement, x: FieldElement) -> FieldElement {
    let half = FieldElement::TWO.inverse().unwrap();
    ((a + b) + alpha * (a - b) / x) * half
}

fn pair_leaf(a: FieldElement, b: FieldElement) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&a.to_bytes());
    out[8..].copy_from_slice(&b.to_bytes());
    out
}

/// A committed folding layer; leaf `j` holds `(F[j], F[j + size/2])`.
pub(crate) struct FriLayer {
    values: Vec<FieldElement>,
    tree: MerkleTree,
}

pub(crate) struct FriProver {
    pub layers: Vec<FriLayer>,
    pub roots: Vec<MerkleRoot>,
    pub final_value: FieldElement,
}

/// Folds `codeword` (on `domain`) `rounds` times down to a constant,
/// committing every intermediate layer.
pub(crate) fn commit(
    codeword: Vec<FieldElement>,
    domain: &EvaluationDomain,
    rounds: usize,
    t: &mut Transcript,
) -> Result<FriProver> {
    let mut cur = codeword;
    let mut dom = domain.clone();
    let mut layers = Vec::new();
    let mut roots = Vec::new();
    let half = FieldElement::TWO.inverse().unwrap();
    for round in 0..rounds {
        let alpha = t.challenge_fe(FOLD_LABEL);
        let n = cur.len() / 2;
        let mut inv_x: Vec<FieldElement> = dom.elements()[..n].to_vec();
        batch_inverse(&mut inv_x);
        let next: Vec<FieldElement> = (0..n)
            .map(|k| {
                let (a, b) = (cur[k], cur[k + n]);
                ((a + b) + alpha * (a - b) * inv_x[k]) * half
            })
            .collect();
        dom = dom.squared();
        cur = next;
        if round + 1 < rounds {
            let m = cur.len() / 2;
            let leaves: Vec<[u8; 16]> = (0..m).map(|j| pair_leaf(cur[j], cur[j + m])).collect();
            let tree = MerkleTree::from_leaves(&leaves)?;
            t.append_root(ROOT_LABEL, &tree.root());
            roots.push(tree.root());
            layers.push(FriLayer { values: cur.clone(), tree });
        }
    }
    let final_value = cur[0];
    t.append_fe(FINAL_LABEL, final_value);
    Ok(FriProver { layers, roots, final_value })
}

impl FriProver {
    /// Openings for a query at position `pos < |L| / 2` of the first layer.
    pub fn open(&self, mut pos: usize) -> Result<Vec<FriStep>> {
        let mut steps = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let half = layer.values.len() / 2;
            let j = pos % half;
            steps.push(FriStep {
                pair: [layer.values[j], layer.values[j + half]],
                path: layer.tree.path(j)?,
            });
            pos = j;
        }
        Ok(steps)
    }
}

/// Checks one query's fold chain given the first-layer pair `(a, b)` at
/// positions `pos` and `pos + |L|/2`.
pub(crate) fn verify_query(
    domain: &EvaluationDomain,
    alphas: &[FieldElement],
    roots: &[MerkleRoot],
    final_value: FieldElement,
    mut pos: usize,
    a: FieldElement,
    b: FieldElement,
    steps: &[FriStep],
) -> bool {
    if steps.len() != roots.len() || alphas.len() != roots.len() + 1 {
        return false;
    }
    let mut dom = domain.clone();
    let mut value = fold_pair(a, b, alphas[0], dom.element(pos));
    dom = dom.squared();
    for ((step, root), alpha) in steps.iter().zip(roots).zip(&alphas[1..]) {
        let half = dom.order / 2;
        let j = pos % half;
        if step.path.leaf_index != j as u64
            || !verify_leaf_hash(&step.path, &hash_leaf(&pair_leaf(step.pair[0], step.pair[1])), root)
        {
            return false;
        }
        if step.pair[usize::from(pos >= half)] != value {
            return false;
        }
        value = fold_pair(step.pair[0], step.pair[1], *alpha, dom.element(j));
        dom = dom.squared();
        pos = j;
    }
    value == final_value
}
