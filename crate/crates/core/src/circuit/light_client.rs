//! Statement circuit for header validation with a toy signature scheme.
//!
//! A committee member holds a secret `sk`. Its public key is
//! `pk = P(sk)` where `P` iterates `x <- (x + k_j)^3` for `rounds` rounds
//! with round keys `k_{j+1} = k_j^2 + c`. A signature on a header digest
//! (four 64-bit limbs `L_0..L_3`) under nonce `n` is `P'(sk + n)`, where `P'`
//! is `P` with `L_j` added to the round key in the first four rounds.
//!
//! Verifying a signature means recomputing both permutations, so the prover
//! needs `(sk, n)` as witness. This reproduces the cost profile of checking
//! many signatures in a data-parallel circuit; it is not an unforgeable
//! signature scheme.
//!
//! Each copy of the circuit checks one signature. Its 32 inputs are a public
//! half (slots `0..16`) and a witness half (slots `16..32`):
//!
//! | slot | value |
//! |------|-------|
//! | 0 | constant 1 |
//! | 1, 2 | `k_0`, `c` |
//! | 3 | `1 - pk` |
//! | 4 | `1 - sig` |
//! | 5..9 | digest limbs |
//! | 16, 17 | `sk`, `n` |
//!
//! The two outputs are `P(sk) + 1 - pk` and `P'(sk + n) + 1 - sig`, both equal
//! to 1 exactly when the signature verifies.

use std::collections::HashMap;

use sha2::{Digest as _, Sha256};

use super::{replicate, DataParallelCircuit, Gate, LayeredCircuit};
use crate::error::{invalid, Result};
use crate::field::FieldElement;
use crate::merkle::Digest;

pub const COPY_INPUTS: usize = 32;
pub const PUBLIC_INPUTS: usize = 16;
pub const DIGEST_LIMBS: usize = 4;
pub const DEFAULT_ROUNDS: usize = 80;

const SLOT_ONE: usize = 0;
const SLOT_K0: usize = 1;
const SLOT_C: usize = 2;
const SLOT_PK: usize = 3;
const SLOT_SIG: usize = 4;
const SLOT_DIGEST: usize = 5;
const SLOT_SK: usize = PUBLIC_INPUTS;
const SLOT_NONCE: usize = PUBLIC_INPUTS + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LightClientParams {
    /// Signatures checked per proof (copies of the sub-circuit).
    pub signatures: usize,
    pub rounds: usize,
}

impl Default for LightClientParams {
    fn default() -> Self {
        Self { signatures: 4, rounds: DEFAULT_ROUNDS }
    }
}

fn hash_constant(label: &[u8]) -> FieldElement {
    let d: [u8; 32] = Sha256::digest(label).into();
    FieldElement::new(u64::from_le_bytes(d[..8].try_into().unwrap()))
}

/// The fixed initial round key and key-step constant.
pub fn round_constants() -> (FieldElement, FieldElement) {
    (hash_constant(b"zkbridge/toy-signature/k0"), hash_constant(b"zkbridge/toy-signature/c"))
}

/// Splits a digest into four little-endian 64-bit limbs reduced into the field.
pub fn digest_limbs(digest: &Digest) -> [FieldElement; DIGEST_LIMBS] {
    std::array::from_fn(|i| FieldElement::new(u64::from_le_bytes(digest[8 * i..8 * i + 8].try_into().unwrap())))
}

fn permute(start: FieldElement, limbs: Option<&[FieldElement; DIGEST_LIMBS]>, rounds: usize) -> FieldElement {
    let (mut k, c) = round_constants();
    let mut x = start;
    for j in 0..rounds {
        let mut t = x + k;
        if let Some(l) = limbs {
            if j < DIGEST_LIMBS {
                t += l[j];
            }
        }
        x = t * t * t;
        k = k * k + c;
    }
    x
}

pub fn toy_public_key(secret: FieldElement, rounds: usize) -> FieldElement {
    permute(secret, None, rounds)
}

pub fn toy_sign(secret: FieldElement, nonce: FieldElement, digest: &Digest, rounds: usize) -> FieldElement {
    permute(secret + nonce, Some(&digest_limbs(digest)), rounds)
}

/// Everything one circuit copy needs: the public statement and the witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignatureInstance {
    pub public_key: FieldElement,
    pub signature: FieldElement,
    pub digest: Digest,
    pub secret: FieldElement,
    pub nonce: FieldElement,
}

impl SignatureInstance {
    pub fn public_inputs(&self) -> Vec<FieldElement> {
        public_inputs(self.public_key, self.signature, &self.digest)
    }

    pub fn witness(&self) -> Vec<FieldElement> {
        let mut w = vec![FieldElement::ZERO; COPY_INPUTS - PUBLIC_INPUTS];
        w[SLOT_SK - PUBLIC_INPUTS] = self.secret;
        w[SLOT_NONCE - PUBLIC_INPUTS] = self.nonce;
        w
    }

    pub fn verifies(&self, rounds: usize) -> bool {
        toy_public_key(self.secret, rounds) == self.public_key
            && toy_sign(self.secret, self.nonce, &self.digest, rounds) == self.signature
    }
}

/// The public half of one copy's input, computable by any verifier.
pub fn public_inputs(public_key: FieldElement, signature: FieldElement, digest: &Digest) -> Vec<FieldElement> {
    let (k0, c) = round_constants();
    let mut p = vec![FieldElement::ZERO; PUBLIC_INPUTS];
    p[SLOT_ONE] = FieldElement::ONE;
    p[SLOT_K0] = k0;
    p[SLOT_C] = c;
    p[SLOT_PK] = FieldElement::ONE - public_key;
    p[SLOT_SIG] = FieldElement::ONE - signature;
    p[SLOT_DIGEST..SLOT_DIGEST + DIGEST_LIMBS].copy_from_slice(&digest_limbs(digest));
    p
}

/// Builds one layer from named gate specs over the previous layer's names.
struct LayerBuilder<'a> {
    prev: &'a HashMap<String, usize>,
    gates: Vec<Gate>,
    names: HashMap<String, usize>,
}

impl<'a> LayerBuilder<'a> {
    fn new(prev: &'a HashMap<String, usize>) -> Self {
        Self { prev, gates: Vec::new(), names: HashMap::new() }
    }

    fn gate(&mut self, name: impl Into<String>, mul: bool, a: &str, b: &str) {
        let (l, r) = (self.prev[a], self.prev[b]);
        self.names.insert(name.into(), self.gates.len());
        self.gates.push(if mul { Gate::mul(l, r) } else { Gate::add(l, r) });
    }

    fn carry(&mut self, name: &str) {
        self.gate(name, true, name, "one");
    }

    fn finish(self) -> (Vec<Gate>, HashMap<String, usize>) {
        (self.gates, self.names)
    }
}

fn limb(j: usize) -> String {
    format!("L{j}")
}

/// The per-signature sub-circuit.
pub fn signature_circuit(rounds: usize) -> Result<LayeredCircuit> {
    if rounds < DIGEST_LIMBS {
        return invalid(format!("at least {DIGEST_LIMBS} rounds are needed to absorb the digest"));
    }
    let mut names: HashMap<String, usize> = [
        ("one", SLOT_ONE),
        ("k", SLOT_K0),
        ("c", SLOT_C),
        ("apk", SLOT_PK),
        ("asig", SLOT_SIG),
        ("sk", SLOT_SK),
        ("nonce", SLOT_NONCE),
    ]
    .into_iter()
    .map(|(n, i)| (n.to_string(), i))
    .collect();
    for j in 0..DIGEST_LIMBS {
        names.insert(limb(j), SLOT_DIGEST + j);
    }
    let mut layers = Vec::new();
    let constants = ["one", "c", "apk", "asig"];

    let mut b = LayerBuilder::new(&names);
    b.gate("one", true, "one", "one");
    b.carry("k");
    for n in &constants[1..] {
        b.carry(n);
    }
    for j in 1..DIGEST_LIMBS {
        b.carry(&limb(j));
    }
    b.gate("xpk", true, "sk", "one");
    b.gate("xsig", false, "sk", "nonce");
    b.gate("kl", false, "k", &limb(0));
    let (gates, next) = b.finish();
    layers.push(gates);
    names = next;

    for j in 0..rounds {
        let live_limbs: Vec<String> = (j + 1..DIGEST_LIMBS).map(limb).collect();
        // t = x + k, and the next round key squared.
        let mut b = LayerBuilder::new(&names);
        b.gate("one", true, "one", "one");
        for n in &constants[1..] {
            b.carry(n);
        }
        for l in &live_limbs {
            b.carry(l);
        }
        b.gate("tpk", false, "xpk", "k");
        b.gate("tsig", false, "xsig", if j < DIGEST_LIMBS { "kl" } else { "k" });
        b.gate("kk", true, "k", "k");
        let (gates, next) = b.finish();
        layers.push(gates);
        names = next;

        // t^2 and t, and k' = k^2 + c.
        let mut b = LayerBuilder::new(&names);
        b.gate("one", true, "one", "one");
        for n in &constants[1..] {
            b.carry(n);
        }
        for l in &live_limbs {
            b.carry(l);
        }
        for t in ["pk", "sig"] {
            let src = format!("t{t}");
            b.gate(format!("sq{t}"), true, &src, &src);
            b.gate(format!("tc{t}"), true, &src, "one");
        }
        b.gate("k", false, "kk", "c");
        let (gates, next) = b.finish();
        layers.push(gates);
        names = next;

        // x = t^3; mix the next digest limb into its round key.
        let mut b = LayerBuilder::new(&names);
        b.gate("one", true, "one", "one");
        for n in &constants[1..] {
            b.carry(n);
        }
        for l in live_limbs.iter().skip(1) {
            b.carry(l);
        }
        b.gate("xpk", true, "sqpk", "tcpk");
        b.gate("xsig", true, "sqsig", "tcsig");
        b.carry("k");
        if j + 1 < DIGEST_LIMBS {
            b.gate("kl", false, "k", &limb(j + 1));
        }
        let (gates, next) = b.finish();
        layers.push(gates);
        names = next;
    }

    let mut b = LayerBuilder::new(&names);
    b.gate("outpk", false, "xpk", "apk");
    b.gate("outsig", false, "xsig", "asig");
    layers.push(b.finish().0);

    layers.reverse();
    LayeredCircuit::new(layers, COPY_INPUTS)
}

/// `signatures` copies of the signature check.
pub fn build_light_client_circuit(params: LightClientParams) -> Result<DataParallelCircuit> {
    if params.signatures == 0 || !params.signatures.is_power_of_two() {
        return invalid(format!("signature count {} is not a power of two", params.signatures));
    }
    replicate(signature_circuit(params.rounds)?, params.signatures)
}

/// Global input of the data-parallel circuit: copy `i` occupies
/// `[32 i, 32 (i + 1))`.
pub fn circuit_input(instances: &[SignatureInstance]) -> Vec<FieldElement> {
    instances
        .iter()
        .flat_map(|s| {
            let mut v = s.public_inputs();
            v.extend(s.witness());
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitShape;
    use crate::field::fe;

    const ROUNDS: usize = 8;

    fn instance(seed: u64, digest: Digest) -> SignatureInstance {
        let secret = fe(1000 + seed);
        let nonce = fe(77 * seed + 5);
        SignatureInstance {
            public_key: toy_public_key(secret, ROUNDS),
            signature: toy_sign(secret, nonce, &digest, ROUNDS),
            digest,
            secret,
            nonce,
        }
    }

    #[test]
    fn shape() {
        let c = signature_circuit(ROUNDS).unwrap();
        assert_eq!(c.depth(), 3 * ROUNDS + 2);
        assert_eq!(c.input_size(), COPY_INPUTS);
        assert!(c.layers().iter().all(|l| l.len() <= 16));
        assert_eq!(c.layer_size(0), 2);
        assert!(signature_circuit(3).is_err());
        assert!(build_light_client_circuit(LightClientParams { signatures: 3, rounds: ROUNDS }).is_err());
    }

    #[test]
    fn honest_signatures_output_all_ones() {
        let digest = [7u8; 32];
        let insts: Vec<_> = (0..4).map(|i| instance(i, digest)).collect();
        assert!(insts.iter().all(|s| s.verifies(ROUNDS)));
        let c = build_light_client_circuit(LightClientParams { signatures: 4, rounds: ROUNDS }).unwrap();
        let out = c.evaluate(&circuit_input(&insts)).unwrap();
        assert_eq!(out.output(), &[FieldElement::ONE; 8]);
    }

    #[test]
    fn forged_signature_breaks_its_copy_only() {
        let digest = [9u8; 32];
        let mut insts: Vec<_> = (0..4).map(|i| instance(i, digest)).collect();
        insts[2].signature += FieldElement::ONE;
        let c = build_light_client_circuit(LightClientParams { signatures: 4, rounds: ROUNDS }).unwrap();
        let out = c.evaluate(&circuit_input(&insts)).unwrap();
        for (i, v) in out.output().iter().enumerate() {
            assert_eq!(*v == FieldElement::ONE, i != 5, "output {i}");
        }
    }

    #[test]
    fn signature_binds_the_digest() {
        let mut inst = instance(3, [1u8; 32]);
        inst.digest[31] ^= 1;
        assert!(!inst.verifies(ROUNDS));
        let out = signature_circuit(ROUNDS).unwrap().evaluate(&circuit_input(&[inst])).unwrap();
        assert_eq!(out.output()[0], FieldElement::ONE);
        assert_ne!(out.output()[1], FieldElement::ONE);
    }

    #[test]
    fn single_signature_degenerates_to_sub_circuit() {
        let c = build_light_client_circuit(LightClientParams { signatures: 1, rounds: ROUNDS }).unwrap();
        assert_eq!(c.flatten(), signature_circuit(ROUNDS).unwrap());
    }
}
