//! Post-processing of finished proofs.
//!
//! A production bridge would wrap the proof in a succinct recursive proof
//! before posting it on chain. That layer is out of scope here; the
//! interface records sizes so that a real compressor can slot in.

use super::DeVirgoProof;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedProof {
    pub scheme: String,
    pub bytes: Vec<u8>,
    pub original_size: usize,
}

impl CompressedProof {
    pub fn size(&self) -> usize {
        self.bytes.len()
    }
}

pub trait Compressor {
    fn name(&self) -> &str;
    fn compress(&self, proof: &DeVirgoProof) -> Result<CompressedProof>;
    fn decompress(&self, compressed: &CompressedProof) -> Result<DeVirgoProof>;
}

/// Passes the serialized proof through unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityCompressor;

impl Compressor for IdentityCompressor {
    fn name(&self) -> &str {
        "identity"
    }

    fn compress(&self, proof: &DeVirgoProof) -> Result<CompressedProof> {
        let bytes = proof.to_bytes();
        Ok(CompressedProof { scheme: self.name().into(), original_size: bytes.len(), bytes })
    }

    fn decompress(&self, compressed: &CompressedProof) -> Result<DeVirgoProof> {
        DeVirgoProof::from_bytes(&compressed.bytes)
    }
}
