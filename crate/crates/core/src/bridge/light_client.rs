//! The header validity rule and the statement circuit proving it.

use super::chain::{committee_commitment, BlockHeader, SignerWitness};
use crate::circuit::light_client::{
    build_light_client_circuit, circuit_input, public_inputs, LightClientParams, SignatureInstance,
};
use crate::circuit::DataParallelCircuit;
use crate::error::{invalid, Result};
use crate::field::FieldElement;
use crate::merkle::Digest;

/// Minimum fraction of the committee that must sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quorum {
    pub num: u32,
    pub den: u32,
}

impl Default for Quorum {
    fn default() -> Self {
        Self { num: 2, den: 3 }
    }
}

impl Quorum {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 || num > den {
            return invalid(format!("quorum {num}/{den} is not a fraction in [0, 1]"));
        }
        Ok(Self { num, den })
    }

    pub fn met(&self, signers: usize, committee: usize) -> bool {
        signers as u128 * self.den as u128 >= self.num as u128 * committee as u128
    }

    /// Smallest signer count meeting the quorum.
    pub fn threshold(&self, committee: usize) -> usize {
        (0..=committee).find(|s| self.met(*s, committee)).unwrap_or(committee)
    }
}

/// What a light client keeps about the tip it follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LightClientState {
    /// Commitment to the committee that must sign the next header.
    pub committee_commitment: Digest,
    pub latest: Digest,
    pub height: u64,
    pub quorum: Quorum,
}

impl LightClientState {
    /// State after accepting `header`.
    pub fn after(header: &BlockHeader, quorum: Quorum) -> Self {
        Self {
            committee_commitment: header.validator_commitment,
            latest: header.digest(),
            height: header.height,
            quorum,
        }
    }
}

/// Checks the public part of a header: linkage, committee and quorum.
pub fn check_header_public(lcs: &LightClientState, prev: &BlockHeader, next: &BlockHeader, keys: &[FieldElement]) -> bool {
    prev.digest() == lcs.latest
        && next.parent == lcs.latest
        && next.height == prev.height + 1
        && committee_commitment(keys) == lcs.committee_commitment
        && next.signers_distinct()
        && next.signatures.iter().all(|s| (s.signer as usize) < keys.len())
        && lcs.quorum.met(next.signatures.len(), keys.len())
}

/// The light-client rule. The toy signatures verify only together with the
/// signers' witnesses, so the caller supplies them.
pub fn light_cc(
    lcs: &LightClientState,
    prev: &BlockHeader,
    next: &BlockHeader,
    keys: &[FieldElement],
    witnesses: &[SignerWitness],
    rounds: usize,
) -> bool {
    check_header_public(lcs, prev, next, keys)
        && witnesses.len() == next.signatures.len()
        && instances(std::slice::from_ref(next), std::slice::from_ref(&keys.to_vec()), Some(std::slice::from_ref(&witnesses.to_vec())))
            .is_ok_and(|v| v.iter().all(|i| i.verifies(rounds)))
}

/// One signature check per header signature, in header order. Without
/// witnesses the secret slots are zero.
fn instances(
    headers: &[BlockHeader],
    committees: &[Vec<FieldElement>],
    witnesses: Option<&[Vec<SignerWitness>]>,
) -> Result<Vec<SignatureInstance>> {
    if headers.len() != committees.len() || witnesses.is_some_and(|w| w.len() != headers.len()) {
        return invalid("one committee (and witness list) per header");
    }
    let mut out = Vec::new();
    for (i, (h, keys)) in headers.iter().zip(committees).enumerate() {
        let digest = h.digest();
        for (j, s) in h.signatures.iter().enumerate() {
            let public_key = *keys
                .get(s.signer as usize)
                .ok_or_else(|| crate::Error::InvalidArgument(format!("signer {} outside the committee", s.signer)))?;
            let w = match witnesses {
                Some(w) => *w[i].get(j).ok_or_else(|| crate::Error::InvalidArgument("missing witness".into()))?,
                None => SignerWitness { secret: FieldElement::ZERO, nonce: FieldElement::ZERO },
            };
            out.push(SignatureInstance { public_key, signature: s.signature, digest, secret: w.secret, nonce: w.nonce });
        }
    }
    if out.is_empty() {
        return invalid("no signatures to prove");
    }
    // Copies come in powers of two; pad by repeating the first check.
    let copies = out.len().next_power_of_two();
    let first = out[0].clone();
    out.resize(copies, first);
    Ok(out)
}

/// The circuit and public input proving every signature of `headers`.
#[derive(Clone, Debug)]
pub struct HeaderStatement {
    pub circuit: DataParallelCircuit,
    pub public: Vec<FieldElement>,
}

impl HeaderStatement {
    pub fn new(headers: &[BlockHeader], committees: &[Vec<FieldElement>], rounds: usize) -> Result<Self> {
        let inst = instances(headers, committees, None)?;
        let circuit = build_light_client_circuit(LightClientParams { signatures: inst.len(), rounds })?;
        let public = inst
            .iter()
            .flat_map(|i| public_inputs(i.public_key, i.signature, &i.digest))
            .collect();
        Ok(Self { circuit, public })
    }

    /// Every output is 1 exactly when every signature verifies.
    pub fn expected_outputs(&self) -> Vec<FieldElement> {
        vec![FieldElement::ONE; self.circuit.copies() * self.circuit.sub().layer_size(0)]
    }
}

/// The full circuit input (public and witness halves).
pub fn statement_input(
    headers: &[BlockHeader],
    committees: &[Vec<FieldElement>],
    witnesses: &[Vec<SignerWitness>],
) -> Result<Vec<FieldElement>> {
    Ok(circuit_input(&instances(headers, committees, Some(witnesses))?))
}
