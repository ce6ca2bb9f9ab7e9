use sha2::{Digest as _, Sha256};

use crate::field::{FieldElement, MODULUS};
use crate::merkle::{Digest, MerkleRoot};

/// Fiat-Shamir transcript over a running SHA-256 state.
///
/// Every absorbed item is framed as `tag || label length || label || data
/// length || data`. A challenge hashes a copy of the state with a counter until
/// the first 8 bytes decode to a canonical field element, then absorbs the
/// challenge so later ones depend on it.
#[derive(Clone)]
pub struct Transcript {
    state: Sha256,
}

impl Transcript {
    /// Starts a transcript bound to a protocol label and the prover identity.
    pub fn new(label: &[u8], identity: &[u8]) -> Self {
        let mut t = Self { state: Sha256::new() };
        t.append_bytes(b"protocol", label);
        t.append_bytes(b"identity", identity);
        t
    }

    fn frame(&mut self, tag: u8, label: &[u8], data: &[u8]) {
        self.state.update([tag]);
        self.state.update((label.len() as u32).to_le_bytes());
        self.state.update(label);
        self.state.update((data.len() as u64).to_le_bytes());
        self.state.update(data);
    }

    pub fn append_bytes(&mut self, label: &[u8], data: &[u8]) {
        self.frame(b'A', label, data);
    }

    pub fn append_u64(&mut self, label: &[u8], v: u64) {
        self.append_bytes(label, &v.to_le_bytes());
    }

    pub fn append_fe(&mut self, label: &[u8], v: FieldElement) {
        self.append_bytes(label, &v.to_bytes());
    }

    pub fn append_fes(&mut self, label: &[u8], v: &[FieldElement]) {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_bytes()).collect();
        self.append_bytes(label, &bytes);
    }

    pub fn append_digest(&mut self, label: &[u8], d: &Digest) {
        self.append_bytes(label, d);
    }

    pub fn append_root(&mut self, label: &[u8], root: &MerkleRoot) {
        self.append_digest(label, &root.0);
    }

    fn squeeze(&mut self, label: &[u8], accept: impl Fn(u64) -> Option<u64>) -> u64 {
        for counter in 0u32.. {
            let mut h = self.state.clone();
            h.update([b'C']);
            h.update((label.len() as u32).to_le_bytes());
            h.update(label);
            h.update(counter.to_le_bytes());
            let d: [u8; 32] = h.finalize().into();
            if let Some(v) = accept(u64::from_le_bytes(d[..8].try_into().unwrap())) {
                self.frame(b'R', label, &v.to_le_bytes());
                return v;
            }
        }
        unreachable!("challenge counter exhausted")
    }

    pub fn challenge_fe(&mut self, label: &[u8]) -> FieldElement {
        FieldElement::new(self.squeeze(label, |v| (v < MODULUS).then_some(v)))
    }

    pub fn challenge_fes(&mut self, label: &[u8], n: usize) -> Vec<FieldElement> {
        (0..n).map(|_| self.challenge_fe(label)).collect()
    }

    /// A uniform index in `0..bound`; `bound` must be a power of two.
    pub fn challenge_index(&mut self, label: &[u8], bound: usize) -> usize {
        assert!(bound.is_power_of_two(), "index bound {bound} is not a power of two");
        let mask = bound as u64 - 1;
        self.squeeze(label, |v| Some(v & mask)) as usize
    }
}
