use super::FieldElement;
use crate::error::{invalid, Result};

/// Evaluations of `V` on the boolean hypercube. Index `i` holds `V(b)` for the
/// point whose `j`-th coordinate is bit `j` of `i` (little-endian packing).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultilinearTable {
    num_vars: usize,
    evals: Vec<FieldElement>,
}

impl MultilinearTable {
    pub fn new(evals: Vec<FieldElement>) -> Result<Self> {
        if !evals.len().is_power_of_two() {
            return invalid(format!("table length {} is not a power of two", evals.len()));
        }
        Ok(Self {
            num_vars: evals.len().trailing_zeros() as usize,
            evals,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn evals(&self) -> &[FieldElement] {
        &self.evals
    }

    pub fn into_evals(self) -> Vec<FieldElement> {
        self.evals
    }

    pub fn evaluate(&self, point: &[FieldElement]) -> Result<FieldElement> {
        mle_evaluate(self, point)
    }
}

/// Evaluates the multilinear extension by folding one variable at a time.
pub fn mle_evaluate(table: &MultilinearTable, point: &[FieldElement]) -> Result<FieldElement> {
    if point.len() != table.num_vars {
        return invalid(format!(
            "point has {} coordinates, table has {} variables",
            point.len(),
            table.num_vars
        ));
    }
    Ok(fold_evaluate(&table.evals, point))
}

/// Folding evaluation on a raw slice whose length is `2^point.len()`.
pub(crate) fn fold_evaluate(evals: &[FieldElement], point: &[FieldElement]) -> FieldElement {
    debug_assert_eq!(evals.len(), 1 << point.len());
    if point.is_empty() {
        return evals[0];
    }
    let mut cur: Vec<FieldElement> = evals
        .chunks(2)
        .map(|p| p[0] + point[0] * (p[1] - p[0]))
        .collect();
    for r in &point[1..] {
        let half = cur.len() / 2;
        for k in 0..half {
            let (a, b) = (cur[2 * k], cur[2 * k + 1]);
            cur[k] = a + *r * (b - a);
        }
        cur.truncate(half);
    }
    cur[0]
}

/// `prod_j ((1 - x_j)(1 - y_j) + x_j y_j)`.
pub fn beta_evaluate(x: &[FieldElement], y: &[FieldElement]) -> Result<FieldElement> {
    if x.len() != y.len() {
        return invalid(format!("beta arguments differ in length: {} vs {}", x.len(), y.len()));
    }
    Ok(beta_unchecked(x, y))
}

pub(crate) fn beta_unchecked(x: &[FieldElement], y: &[FieldElement]) -> FieldElement {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let ab = *a * *b;
            FieldElement::ONE - *a - *b + ab + ab
        })
        .product()
}

/// `beta(bits(index), point)` for a little-endian integer label.
pub(crate) fn beta_index(point: &[FieldElement], index: usize) -> FieldElement {
    point
        .iter()
        .enumerate()
        .map(|(j, r)| if (index >> j) & 1 == 1 { *r } else { FieldElement::ONE - *r })
        .product()
}

/// Table of `beta(b, point)` over every boolean `b`, in O(2^l).
pub fn eq_table(point: &[FieldElement]) -> Vec<FieldElement> {
    let mut table = Vec::with_capacity(1 << point.len());
    table.push(FieldElement::ONE);
    for r in point {
        let len = table.len();
        table.resize(2 * len, FieldElement::ZERO);
        for i in 0..len {
            let hi = table[i] * *r;
            table[i + len] = hi;
            table[i] -= hi;
        }
    }
    table
}
