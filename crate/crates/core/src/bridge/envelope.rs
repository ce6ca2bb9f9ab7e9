//! What a relay sends to the updater.

use super::chain::BlockHeader;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::merkle::Digest;

const ENVELOPE_MAGIC: &[u8; 4] = b"ZKBE";
const MAX_BATCH: usize = 1 << 12;

/// A proven run of headers extending `parent`. Single-header updates have
/// one entry in `headers`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayEnvelope {
    pub parent: Digest,
    pub headers: Vec<BlockHeader>,
    /// The signing committee's keys for each header.
    pub committees: Vec<Vec<FieldElement>>,
    pub identity: Vec<u8>,
    /// Serialized proof.
    pub proof: Vec<u8>,
}

impl RelayEnvelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(ENVELOPE_MAGIC).digest(&self.parent);
        w.u32(self.headers.len() as u32);
        for (h, keys) in self.headers.iter().zip(&self.committees) {
            h.write(&mut w);
            w.fes(keys);
        }
        w.blob(&self.identity).blob(&self.proof);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.bytes(4)? != ENVELOPE_MAGIC {
            return Err(Error::Decode("not an envelope (bad magic)".into()));
        }
        let parent = r.digest()?;
        let n = r.u32()? as usize;
        if n == 0 || n > MAX_BATCH {
            return Err(Error::Decode(format!("{n} headers in an envelope")));
        }
        let mut headers = Vec::with_capacity(n);
        let mut committees = Vec::with_capacity(n);
        for _ in 0..n {
            headers.push(BlockHeader::read(&mut r)?);
            committees.push(r.fes(1 << 16)?);
        }
        let identity = r.blob()?;
        let proof = r.blob()?;
        r.finish()?;
        Ok(Self { parent, headers, committees, identity, proof })
    }

    /// The last header in the run.
    pub fn tip(&self) -> &BlockHeader {
        self.headers.last().expect("envelopes carry at least one header")
    }
}

#[cfg(test)]
mod tests {
    use super::super::chain::{ChainParams, ChainSim};
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let mut sim =
            ChainSim::new(ChainParams { committee_size: 4, signers: 3, rotation: 2, rounds: 8, seed: 9 }).unwrap();
        let b = sim.produce_block(vec![b"x".to_vec()]).unwrap().clone();
        let env = RelayEnvelope {
            parent: b.header.parent,
            headers: vec![b.header.clone()],
            committees: vec![sim.keys_for(2)],
            identity: b"relay-0".to_vec(),
            proof: vec![1, 2, 3],
        };
        let bytes = env.to_bytes();
        assert_eq!(RelayEnvelope::from_bytes(&bytes).unwrap(), env);
        for cut in 0..bytes.len() {
            assert!(RelayEnvelope::from_bytes(&bytes[..cut]).is_err());
        }
    }
}
