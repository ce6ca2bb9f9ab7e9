use sha2::{Digest as _, Sha256};

use super::{write_circuit, CircuitShape, Gate, GateKind, LayerValues, LayeredCircuit};
use crate::error::{invalid, Result};
use crate::field::FieldElement;
use crate::merkle::Digest;

/// `N = 2^log_copies` copies of `sub` with no wiring between them.
///
/// Gate `o` of copy `c` has global label `o + c * S` where `S` is the size of
/// its layer in `sub`, so the copy index occupies the high-order bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataParallelCircuit {
    sub: LayeredCircuit,
    log_copies: usize,
}

pub fn replicate(sub: LayeredCircuit, copies: usize) -> Result<DataParallelCircuit> {
    DataParallelCircuit::new(sub, copies)
}

impl DataParallelCircuit {
    pub fn new(sub: LayeredCircuit, copies: usize) -> Result<Self> {
        if copies == 0 || !copies.is_power_of_two() {
            return invalid(format!("copy count {copies} is not a power of two"));
        }
        if sub.input_len() != sub.input_size() {
            return invalid("a replicated sub-circuit needs a power-of-two input length");
        }
        Ok(Self { sub, log_copies: copies.trailing_zeros() as usize })
    }

    pub fn sub(&self) -> &LayeredCircuit {
        &self.sub
    }

    pub fn copies(&self) -> usize {
        1 << self.log_copies
    }

    pub fn log_copies(&self) -> usize {
        self.log_copies
    }

    pub fn input_size(&self) -> usize {
        self.sub.input_size() << self.log_copies
    }

    pub fn gate_count(&self) -> u64 {
        self.sub.gate_count() << self.log_copies
    }

    /// The same circuit with explicit global gate labels.
    pub fn flatten(&self) -> LayeredCircuit {
        let n = self.copies();
        let layers = (0..self.sub.depth())
            .map(|i| {
                let next = self.sub.layer_size(i + 1) as u32;
                let mut out = Vec::with_capacity(self.sub.layer_size(i) * n);
                for c in 0..n as u32 {
                    out.extend(self.sub.layer(i).iter().map(|g| match g.kind {
                        GateKind::Dummy => Gate::DUMMY,
                        kind => Gate { kind, left: g.left + c * next, right: g.right + c * next },
                    }));
                }
                out
            })
            .collect();
        LayeredCircuit::new(layers, self.input_size()).expect("flattening preserves validity")
    }

    /// Evaluates each copy on its slice `input[c*m..(c+1)*m]` and concatenates.
    pub fn evaluate(&self, input: &[FieldElement]) -> Result<LayerValues> {
        if input.len() != self.input_size() {
            return invalid(format!("expected {} inputs, got {}", self.input_size(), input.len()));
        }
        let m = self.sub.input_size();
        let mut values = vec![Vec::new(); self.sub.depth() + 1];
        let mut gate_evals = 0;
        for chunk in input.chunks(m) {
            let v = self.sub.evaluate(chunk)?;
            gate_evals += v.gate_evals;
            for (dst, src) in values.iter_mut().zip(v.values) {
                dst.extend(src);
            }
        }
        Ok(LayerValues { values, gate_evals })
    }
}

impl CircuitShape for DataParallelCircuit {
    fn depth(&self) -> usize {
        self.sub.depth()
    }

    fn layer_log_size(&self, layer: usize) -> usize {
        self.sub.layer_log_size(layer) + self.log_copies
    }

    /// Factors as the sub-circuit predicate on the low coordinates times
    /// `prod_j (z_j x_j y_j + (1 - z_j)(1 - x_j)(1 - y_j))` over the copy bits.
    fn wiring_mle(
        &self,
        layer: usize,
        z: &[FieldElement],
        x: &[FieldElement],
        y: &[FieldElement],
    ) -> Result<(FieldElement, FieldElement)> {
        let n = self.log_copies;
        if z.len() < n || x.len() < n || y.len() < n {
            return invalid("wiring point shorter than the copy index");
        }
        let (zl, zh) = z.split_at(z.len() - n);
        let (xl, xh) = x.split_at(x.len() - n);
        let (yl, yh) = y.split_at(y.len() - n);
        let (add, mul) = self.sub.wiring_mle(layer, zl, xl, yl)?;
        let same_copy: FieldElement = zh
            .iter()
            .zip(xh)
            .zip(yh)
            .map(|((a, b), c)| {
                let one = FieldElement::ONE;
                *a * *b * *c + (one - *a) * (one - *b) * (one - *c)
            })
            .product();
        Ok((add * same_copy, mul * same_copy))
    }

    fn fingerprint(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(b"data-parallel-circuit");
        h.update(write_circuit(&self.sub, self.copies()).as_bytes());
        h.finalize().into()
    }
}
