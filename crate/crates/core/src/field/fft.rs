use super::{batch_inverse, FieldElement, MULTIPLICATIVE_GENERATOR, TWO_ADICITY};
use crate::error::{invalid, Result};

/// Which role a domain plays in the polynomial commitment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    /// The interpolation subgroup `H`.
    H,
    /// The evaluation coset `L`.
    L,
}

/// A multiplicative coset `offset * <generator>` of power-of-two order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaluationDomain {
    pub log_order: u32,
    pub order: usize,
    pub generator: FieldElement,
    pub offset: FieldElement,
    pub kind: DomainKind,
}

impl EvaluationDomain {
    /// The subgroup of order `2^log_order`.
    pub fn subgroup(log_order: u32) -> Result<Self> {
        if log_order > TWO_ADICITY {
            return invalid(format!("no subgroup of order 2^{log_order}"));
        }
        Ok(Self {
            log_order,
            order: 1 << log_order,
            generator: FieldElement::two_adic_root(log_order),
            offset: FieldElement::ONE,
            kind: DomainKind::H,
        })
    }

    /// A coset of the order-`2^log_order` subgroup, shifted by the group
    /// generator so it is disjoint from every power-of-two subgroup.
    pub fn coset(log_order: u32) -> Result<Self> {
        let mut d = Self::subgroup(log_order)?;
        d.offset = FieldElement::new(MULTIPLICATIVE_GENERATOR);
        d.kind = DomainKind::L;
        Ok(d)
    }

    pub fn element(&self, k: usize) -> FieldElement {
        self.offset * self.generator.pow(k as u64)
    }

    pub fn elements(&self) -> Vec<FieldElement> {
        let mut out = Vec::with_capacity(self.order);
        let mut x = self.offset;
        for _ in 0..self.order {
            out.push(x);
            x *= self.generator;
        }
        out
    }

    /// The domain of squares, which has half the order.
    pub fn squared(&self) -> Self {
        Self {
            log_order: self.log_order - 1,
            order: self.order / 2,
            generator: self.generator.square(),
            offset: self.offset.square(),
            kind: self.kind,
        }
    }

    /// Vanishing polynomial `x^|D| - offset^|D|` evaluated at `x`.
    pub fn vanishing_at(&self, x: FieldElement) -> FieldElement {
        x.pow(self.order as u64) - self.offset.pow(self.order as u64)
    }
}

fn bit_reverse<T>(v: &mut [T]) {
    let n = v.len();
    let log = n.trailing_zeros();
    if log == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - log);
        if i < j {
            v.swap(i, j);
        }
    }
}

/// In-place radix-2 NTT: `v[k] <- sum_j v[j] * root^(jk)`.
fn ntt(v: &mut [FieldElement], root: FieldElement) {
    let n = v.len();
    bit_reverse(v);
    let mut len = 2;
    while len <= n {
        let w_len = root.pow((n / len) as u64);
        let half = len / 2;
        let mut twiddles = Vec::with_capacity(half);
        let mut w = FieldElement::ONE;
        for _ in 0..half {
            twiddles.push(w);
            w *= w_len;
        }
        for chunk in v.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * *w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
}

/// Evaluates the polynomial with `coeffs` on every point of `domain`.
pub fn fft_evaluate(coeffs: &[FieldElement], domain: &EvaluationDomain) -> Result<Vec<FieldElement>> {
    let n = coeffs.len();
    if !n.is_power_of_two() {
        return invalid(format!("coefficient count {n} is not a power of two"));
    }
    if n > domain.order {
        return invalid(format!("{n} coefficients exceed domain order {}", domain.order));
    }
    let mut v = vec![FieldElement::ZERO; domain.order];
    let mut shift = FieldElement::ONE;
    for (dst, c) in v.iter_mut().zip(coeffs) {
        *dst = *c * shift;
        shift *= domain.offset;
    }
    ntt(&mut v, domain.generator);
    Ok(v)
}

/// Interpolates the unique polynomial of degree `< |domain|` through
/// `evals[k] = f(offset * g^k)`.
pub fn ifft_interpolate(evals: &[FieldElement], domain: &EvaluationDomain) -> Result<Vec<FieldElement>> {
    if evals.len() != domain.order {
        return invalid(format!(
            "{} evaluations for a domain of order {}",
            evals.len(),
            domain.order
        ));
    }
    let mut v = evals.to_vec();
    let inv_root = domain.generator.inverse().expect("generator is nonzero");
    ntt(&mut v, inv_root);
    let n_inv = FieldElement::new(domain.order as u64).inverse().unwrap();
    let off_inv = domain.offset.inverse().unwrap();
    let mut shift = n_inv;
    for c in v.iter_mut() {
        *c *= shift;
        shift *= off_inv;
    }
    Ok(v)
}

/// Horner evaluation of a coefficient vector.
#[cfg(test)]
pub(crate) fn horner(coeffs: &[FieldElement], x: FieldElement) -> FieldElement {
    coeffs.iter().rev().fold(FieldElement::ZERO, |acc, c| acc * x + *c)
}

/// Evaluates at `x` the polynomial of degree `< |H|` taking `values[k]` at
/// `g^k`, using the barycentric form over the subgroup `H`. `x` must lie
/// outside `H`.
pub(crate) fn lagrange_evaluate(values: &[FieldElement], domain: &EvaluationDomain, x: FieldElement) -> FieldElement {
    debug_assert_eq!(domain.offset, FieldElement::ONE);
    let n = domain.order;
    let mut denoms: Vec<FieldElement> = Vec::with_capacity(n);
    let mut h = FieldElement::ONE;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        denoms.push(x - h);
        points.push(h);
        h *= domain.generator;
    }
    batch_inverse(&mut denoms);
    let scale = domain.vanishing_at(x) * FieldElement::new(n as u64).inverse().unwrap();
    let sum: FieldElement = values
        .iter()
        .zip(points.iter().zip(&denoms))
        .map(|(v, (p, d))| *v * *p * *d)
        .sum();
    scale * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::fe;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<FieldElement> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| FieldElement::random(&mut rng)).collect()
    }

    #[test]
    fn constant_polynomial_evaluates_everywhere() {
        let d = EvaluationDomain::coset(4).unwrap();
        let out = fft_evaluate(&[fe(42)], &d).unwrap();
        assert!(out.iter().all(|v| *v == fe(42)));
    }

    #[test]
    fn fft_matches_naive_horner_on_coset() {
        let coeffs = random_vec(8, 1);
        let l = EvaluationDomain::coset(4).unwrap();
        let fast = fft_evaluate(&coeffs, &l).unwrap();
        let naive: Vec<_> = l.elements().into_iter().map(|x| horner(&coeffs, x)).collect();
        assert_eq!(fast, naive);
    }

    #[test]
    fn round_trips_are_exact() {
        for log in 0..8 {
            let h = EvaluationDomain::subgroup(log).unwrap();
            let v = random_vec(h.order, log as u64);
            let coeffs = ifft_interpolate(&v, &h).unwrap();
            assert_eq!(fft_evaluate(&coeffs, &h).unwrap(), v);
            let l = EvaluationDomain::coset(log).unwrap();
            let evals = fft_evaluate(&v, &l).unwrap();
            assert_eq!(ifft_interpolate(&evals, &l).unwrap(), v);
        }
    }

    #[test]
    fn constant_evaluations_interpolate_to_constant() {
        let h = EvaluationDomain::subgroup(3).unwrap();
        let coeffs = ifft_interpolate(&[fe(9); 8], &h).unwrap();
        assert_eq!(coeffs[0], fe(9));
        assert!(coeffs[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn size_four_matches_lagrange_oracle() {
        // Independent oracle: classic Lagrange basis, coefficients recovered by
        // expanding each basis polynomial.
        let h = EvaluationDomain::subgroup(2).unwrap();
        let pts = h.elements();
        let vals = [fe(3), fe(1), fe(4), fe(1)];
        let mut expected = [FieldElement::ZERO; 4];
        for i in 0..4 {
            let mut basis = vec![FieldElement::ONE];
            let mut denom = FieldElement::ONE;
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let mut next = vec![FieldElement::ZERO; basis.len() + 1];
                for (k, b) in basis.iter().enumerate() {
                    next[k] -= *b * pts[j];
                    next[k + 1] += *b;
                }
                basis = next;
                denom *= pts[i] - pts[j];
            }
            let scale = vals[i] / denom;
            for (e, b) in expected.iter_mut().zip(&basis) {
                *e += *b * scale;
            }
        }
        assert_eq!(ifft_interpolate(&vals, &h).unwrap(), expected.to_vec());
    }

    #[test]
    fn rejects_bad_sizes() {
        let d = EvaluationDomain::subgroup(3).unwrap();
        assert!(fft_evaluate(&[fe(1); 3], &d).is_err());
        assert!(fft_evaluate(&[fe(1); 16], &d).is_err());
        assert!(ifft_interpolate(&[fe(1); 4], &d).is_err());
    }

    #[test]
    fn coset_is_disjoint_from_subgroup() {
        let h = EvaluationDomain::subgroup(3).unwrap();
        let l = EvaluationDomain::coset(5).unwrap();
        let hs = h.elements();
        assert!(l.elements().iter().all(|x| !hs.contains(x)));
        assert_eq!(l.generator.pow(32), FieldElement::ONE);
        assert_ne!(l.generator.pow(16), FieldElement::ONE);
    }

    #[test]
    fn barycentric_matches_interpolation() {
        let h = EvaluationDomain::subgroup(4).unwrap();
        let v = random_vec(16, 7);
        let coeffs = ifft_interpolate(&v, &h).unwrap();
        let x = fe(987654321);
        assert_eq!(lagrange_evaluate(&v, &h, x), horner(&coeffs, x));
    }
}
