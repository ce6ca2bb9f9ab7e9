//! Layered arithmetic circuits.
//!
//! Layer 0 is the output layer; the gates of layer `i` read two values from
//! layer `i + 1`, and the last gate layer reads the input vector. Every layer
//! (inputs included) is padded to a power of two. Padding gates are
//! [`GateKind::Dummy`]: they output zero and contribute to neither wiring
//! predicate.

pub mod light_client;
mod parallel;
mod text;

pub use parallel::{replicate, DataParallelCircuit};
pub use text::{parse_circuit, write_circuit};

use sha2::{Digest as _, Sha256};

use crate::error::{invalid, Result};
use crate::field::{eq_table, FieldElement};
use crate::merkle::Digest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Add,
    Mul,
    Dummy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub left: u32,
    pub right: u32,
}

impl Gate {
    pub const DUMMY: Gate = Gate { kind: GateKind::Dummy, left: 0, right: 0 };

    pub fn add(left: usize, right: usize) -> Self {
        Self { kind: GateKind::Add, left: left as u32, right: right as u32 }
    }

    pub fn mul(left: usize, right: usize) -> Self {
        Self { kind: GateKind::Mul, left: left as u32, right: right as u32 }
    }

    pub(crate) fn apply(&self, next: &[FieldElement]) -> FieldElement {
        match self.kind {
            GateKind::Add => next[self.left as usize] + next[self.right as usize],
            GateKind::Mul => next[self.left as usize] * next[self.right as usize],
            GateKind::Dummy => FieldElement::ZERO,
        }
    }
}

/// What a verifier needs to know about a circuit: its shape and the
/// multilinear extensions of its wiring predicates.
pub trait CircuitShape {
    /// Number of gate layers `d`; layer `d` is the input.
    fn depth(&self) -> usize;
    /// `log2` of the size of layer `i`, for `i` in `0..=depth`.
    fn layer_log_size(&self, layer: usize) -> usize;
    /// `(add~, mult~)` of the gates in layer `layer` at `(z, x, y)`, where `z`
    /// ranges over layer `layer` and `x, y` over layer `layer + 1`.
    fn wiring_mle(
        &self,
        layer: usize,
        z: &[FieldElement],
        x: &[FieldElement],
        y: &[FieldElement],
    ) -> Result<(FieldElement, FieldElement)>;
    /// Stable digest of the circuit description, bound into transcripts.
    fn fingerprint(&self) -> Digest;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredCircuit {
    layers: Vec<Vec<Gate>>,
    input_len: usize,
    input_size: usize,
}

/// Values of every layer; `values[0]` is the output and `values[depth]` the
/// (padded) input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerValues {
    pub values: Vec<Vec<FieldElement>>,
    /// Gates evaluated to produce these values, padding included.
    pub gate_evals: u64,
}

impl LayerValues {
    pub fn output(&self) -> &[FieldElement] {
        &self.values[0]
    }

    pub fn input(&self) -> &[FieldElement] {
        self.values.last().unwrap()
    }
}

impl LayeredCircuit {
    /// Builds a circuit from gate layers listed output first. Layers are padded
    /// with dummy gates, and the input with zeros, to powers of two.
    pub fn new(mut layers: Vec<Vec<Gate>>, input_len: usize) -> Result<Self> {
        if layers.is_empty() {
            return invalid("a circuit needs at least one gate layer");
        }
        if input_len == 0 {
            return invalid("a circuit needs at least one input");
        }
        let input_size = input_len.next_power_of_two();
        for layer in layers.iter_mut() {
            if layer.is_empty() {
                return invalid("empty gate layer");
            }
            layer.resize(layer.len().next_power_of_two(), Gate::DUMMY);
        }
        for i in 0..layers.len() {
            let next = if i + 1 < layers.len() { layers[i + 1].len() } else { input_size };
            for (o, g) in layers[i].iter().enumerate() {
                if g.kind != GateKind::Dummy && (g.left as usize >= next || g.right as usize >= next) {
                    return invalid(format!(
                        "gate {o} of layer {i} reads beyond the {next} values of the next layer"
                    ));
                }
            }
        }
        Ok(Self { layers, input_len, input_size })
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &[Gate] {
        &self.layers[i]
    }

    /// Declared number of inputs (before padding).
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn layer_size(&self, i: usize) -> usize {
        if i < self.layers.len() {
            self.layers[i].len()
        } else {
            self.input_size
        }
    }

    pub fn gate_count(&self) -> u64 {
        self.layers.iter().map(|l| l.len() as u64).sum()
    }

    pub fn evaluate(&self, input: &[FieldElement]) -> Result<LayerValues> {
        if input.len() != self.input_len && input.len() != self.input_size {
            return invalid(format!(
                "expected {} inputs, got {}",
                self.input_len,
                input.len()
            ));
        }
        let mut padded = input.to_vec();
        padded.resize(self.input_size, FieldElement::ZERO);
        let mut values = vec![padded];
        for layer in self.layers.iter().rev() {
            let next = values.last().unwrap();
            let cur = layer.iter().map(|g| g.apply(next)).collect();
            values.push(cur);
        }
        values.reverse();
        Ok(LayerValues { values, gate_evals: self.gate_count() })
    }

    pub(crate) fn check_wiring_dims(
        &self,
        layer: usize,
        z: &[FieldElement],
        x: &[FieldElement],
        y: &[FieldElement],
    ) -> Result<()> {
        if layer >= self.depth() {
            return invalid(format!("layer {layer} out of range for depth {}", self.depth()));
        }
        let (sz, sn) = (self.layer_log_size(layer), self.layer_log_size(layer + 1));
        if z.len() != sz || x.len() != sn || y.len() != sn {
            return invalid(format!(
                "wiring point dimensions ({}, {}, {}) do not match ({sz}, {sn}, {sn})",
                z.len(),
                x.len(),
                y.len()
            ));
        }
        Ok(())
    }
}

impl CircuitShape for LayeredCircuit {
    fn depth(&self) -> usize {
        self.layers.len()
    }

    fn layer_log_size(&self, layer: usize) -> usize {
        self.layer_size(layer).trailing_zeros() as usize
    }

    fn wiring_mle(
        &self,
        layer: usize,
        z: &[FieldElement],
        x: &[FieldElement],
        y: &[FieldElement],
    ) -> Result<(FieldElement, FieldElement)> {
        self.check_wiring_dims(layer, z, x, y)?;
        let (ez, ex, ey) = (eq_table(z), eq_table(x), eq_table(y));
        let mut add = FieldElement::ZERO;
        let mut mul = FieldElement::ZERO;
        for (o, g) in self.layers[layer].iter().enumerate() {
            let term = || ez[o] * ex[g.left as usize] * ey[g.right as usize];
            match g.kind {
                GateKind::Add => add += term(),
                GateKind::Mul => mul += term(),
                GateKind::Dummy => {}
            }
        }
        Ok((add, mul))
    }

    fn fingerprint(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(b"layered-circuit");
        h.update(write_circuit(self, 1).as_bytes());
        h.finalize().into()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::field::{beta_evaluate, fe};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn mul_add_circuit() -> LayeredCircuit {
        // out = x0 * x1 + x2
        LayeredCircuit::new(
            vec![vec![Gate::add(0, 1)], vec![Gate::mul(0, 1), Gate::mul(2, 3)]],
            4,
        )
        .unwrap()
    }

    pub(crate) fn random_circuit(rng: &mut impl Rng, depth: usize, max_log: usize) -> LayeredCircuit {
        let logs: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=max_log)).collect();
        let layers = (0..depth)
            .map(|i| {
                let next = 1usize << logs[i + 1];
                (0..1usize << logs[i])
                    .map(|_| {
                        let (l, r) = (rng.gen_range(0..next), rng.gen_range(0..next));
                        match rng.gen_range(0..5) {
                            0 => Gate::DUMMY,
                            1 | 2 => Gate::add(l, r),
                            _ => Gate::mul(l, r),
                        }
                    })
                    .collect()
            })
            .collect();
        LayeredCircuit::new(layers, 1 << logs[depth]).unwrap()
    }

    fn bits(i: usize, n: usize) -> Vec<FieldElement> {
        (0..n).map(|j| fe(((i >> j) & 1) as u64)).collect()
    }

    #[test]
    fn hand_evaluated_example() {
        let c = LayeredCircuit::new(
            vec![vec![Gate::add(0, 1)], vec![Gate::mul(0, 1), Gate::add(2, 3)]],
            3,
        )
        .unwrap();
        let v = c.evaluate(&[fe(2), fe(3), fe(4)]).unwrap();
        assert_eq!(v.output(), &[fe(10)]);
        assert_eq!(v.gate_evals, 3);
        assert!(c.evaluate(&[fe(1), fe(2)]).is_err());
    }

    #[test]
    fn add_identity_on_zeros() {
        let c = LayeredCircuit::new(vec![(0..4).map(|i| Gate::add(i, i)).collect()], 4).unwrap();
        assert_eq!(c.evaluate(&[fe(0); 4]).unwrap().output(), &[fe(0); 4]);
    }

    #[test]
    fn padding_and_bounds() {
        let c = LayeredCircuit::new(vec![vec![Gate::add(0, 1); 3]], 3).unwrap();
        assert_eq!(c.layer_size(0), 4);
        assert_eq!(c.layer(0)[3], Gate::DUMMY);
        assert_eq!(c.input_size(), 4);
        assert!(LayeredCircuit::new(vec![vec![Gate::add(0, 4)]], 4).is_err());
    }

    #[test]
    fn wiring_at_boolean_points() {
        let c = mul_add_circuit();
        // layer 1 gate 1 is mul(2, 3)
        let (a, m) = c.wiring_mle(1, &bits(1, 1), &bits(2, 2), &bits(3, 2)).unwrap();
        assert_eq!((a, m), (fe(0), fe(1)));
        let (a, m) = c.wiring_mle(1, &bits(1, 1), &bits(3, 2), &bits(2, 2)).unwrap();
        assert_eq!((a, m), (fe(0), fe(0)));
        assert!(c.wiring_mle(1, &bits(1, 2), &bits(3, 2), &bits(2, 2)).is_err());
    }

    #[test]
    fn wiring_matches_brute_force_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = LayeredCircuit::new(
            vec![vec![Gate::add(0, 3), Gate::mul(1, 1), Gate::mul(2, 0), Gate::add(3, 2)]],
            4,
        )
        .unwrap();
        let pt = |rng: &mut ChaCha8Rng| -> Vec<FieldElement> {
            (0..2).map(|_| FieldElement::random(rng)).collect()
        };
        let (z, x, y) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        // Sum over every boolean triple of predicate * beta products.
        let mut add = FieldElement::ZERO;
        let mut mul = FieldElement::ZERO;
        for o in 0..4 {
            for l in 0..4 {
                for r in 0..4 {
                    let g = c.layer(0)[o];
                    if g.left as usize != l || g.right as usize != r {
                        continue;
                    }
                    let w = beta_evaluate(&z, &bits(o, 2)).unwrap()
                        * beta_evaluate(&x, &bits(l, 2)).unwrap()
                        * beta_evaluate(&y, &bits(r, 2)).unwrap();
                    match g.kind {
                        GateKind::Add => add += w,
                        GateKind::Mul => mul += w,
                        GateKind::Dummy => {}
                    }
                }
            }
        }
        assert_eq!(c.wiring_mle(0, &z, &x, &y).unwrap(), (add, mul));
    }

    #[test]
    fn layer_relation_holds_by_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let c = random_circuit(&mut rng, 3, 3);
            let input: Vec<_> = (0..c.input_size()).map(|_| FieldElement::random(&mut rng)).collect();
            let vals = c.evaluate(&input).unwrap();
            for i in 0..c.depth() {
                let (sz, sn) = (c.layer_log_size(i), c.layer_log_size(i + 1));
                for zi in 0..1 << sz {
                    let mut acc = FieldElement::ZERO;
                    for xi in 0..1 << sn {
                        for yi in 0..1 << sn {
                            let (a, m) = c.wiring_mle(i, &bits(zi, sz), &bits(xi, sn), &bits(yi, sn)).unwrap();
                            let (vx, vy) = (vals.values[i + 1][xi], vals.values[i + 1][yi]);
                            acc += a * (vx + vy) + m * vx * vy;
                        }
                    }
                    assert_eq!(acc, vals.values[i][zi]);
                }
            }
        }
    }
}
