//! A simulated sender chain with a rotating signing committee.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use crate::circuit::light_client::{toy_public_key, toy_sign};
use crate::codec::{Reader, Writer};
use crate::error::{invalid, Error, Result};
use crate::field::FieldElement;
use crate::merkle::{mt_commit, mt_open, Digest, MerklePath, MerkleRoot};

/// A committee member's signature on a header digest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeaderSignature {
    pub signer: u32,
    pub signature: FieldElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockHeader {
    pub height: u64,
    pub parent: Digest,
    pub tx_root: MerkleRoot,
    /// Commits to the public keys of the committee signing the next header.
    pub validator_commitment: Digest,
    pub signatures: Vec<HeaderSignature>,
}

impl BlockHeader {
    /// Hash of every field except the signatures.
    pub fn digest(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(b"zkbridge/header");
        h.update(self.height.to_le_bytes());
        h.update(self.parent);
        h.update(self.tx_root.0);
        h.update(self.validator_commitment);
        h.finalize().into()
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.height).digest(&self.parent).digest(&self.tx_root.0).digest(&self.validator_commitment);
        w.u32(self.signatures.len() as u32);
        for s in &self.signatures {
            w.u32(s.signer).fe(s.signature);
        }
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let height = r.u64()?;
        let parent = r.digest()?;
        let tx_root = MerkleRoot(r.digest()?);
        let validator_commitment = r.digest()?;
        let n = r.u32()? as usize;
        if n > 1 << 16 {
            return Err(Error::Decode(format!("{n} signatures")));
        }
        let signatures = (0..n)
            .map(|_| Ok(HeaderSignature { signer: r.u32()?, signature: r.fe()? }))
            .collect::<Result<_>>()?;
        Ok(Self { height, parent, tx_root, validator_commitment, signatures })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    /// Signer indexes are distinct.
    pub fn signers_distinct(&self) -> bool {
        let mut seen: Vec<u32> = self.signatures.iter().map(|s| s.signer).collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

/// Hash of a committee's public key list.
pub fn committee_commitment(keys: &[FieldElement]) -> Digest {
    let mut h = Sha256::new();
    h.update(b"zkbridge/committee");
    h.update((keys.len() as u64).to_le_bytes());
    for k in keys {
        h.update(k.to_bytes());
    }
    h.finalize().into()
}

/// What a signer knows besides the signature: the toy scheme needs it to
/// verify (see the circuit module).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignerWitness {
    pub secret: FieldElement,
    pub nonce: FieldElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<Vec<u8>>,
    /// One entry per header signature.
    pub witnesses: Vec<SignerWitness>,
}

impl Block {
    pub fn digest(&self) -> Digest {
        self.header.digest()
    }

    /// Inclusion path for transaction `index`.
    pub fn tx_path(&self, index: usize) -> Result<MerklePath> {
        Ok(mt_open(&self.txs, index)?.1)
    }
}

#[derive(Clone, Debug)]
pub struct Committee {
    pub secrets: Vec<FieldElement>,
    pub keys: Vec<FieldElement>,
}

impl Committee {
    pub fn commitment(&self) -> Digest {
        committee_commitment(&self.keys)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainParams {
    pub committee_size: usize,
    /// Signatures per header.
    pub signers: usize,
    /// Heights per committee; the committee for height `h` is
    /// `(h - 1) / rotation`.
    pub rotation: u64,
    pub rounds: usize,
    pub seed: u64,
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        if self.committee_size == 0 || self.signers == 0 || self.signers > self.committee_size {
            return invalid(format!("{} signers from a committee of {}", self.signers, self.committee_size));
        }
        if self.rotation == 0 {
            return invalid("rotation period must be positive");
        }
        Ok(())
    }
}

/// The sender chain: every block produced, indexed by digest, plus the
/// canonical sequence.
#[derive(Clone, Debug)]
pub struct ChainSim {
    params: ChainParams,
    blocks: BTreeMap<Digest, Block>,
    canonical: Vec<Digest>,
    forks: u64,
}

fn derive_fe(seed: u64, label: &[u8], a: u64, b: &[u8]) -> FieldElement {
    let mut h = Sha256::new();
    h.update(b"zkbridge/sim");
    h.update(seed.to_le_bytes());
    h.update(label);
    h.update(a.to_le_bytes());
    h.update(b);
    let d: [u8; 32] = h.finalize().into();
    FieldElement::new(u64::from_le_bytes(d[..8].try_into().unwrap()))
}

impl ChainSim {
    /// Starts the chain with its genesis block (height 1).
    pub fn new(params: ChainParams) -> Result<Self> {
        params.validate()?;
        let mut sim = Self { params, blocks: BTreeMap::new(), canonical: Vec::new(), forks: 0 };
        let genesis = sim.build(None, vec![b"genesis".to_vec()], 0)?;
        sim.canonical.push(genesis.digest());
        sim.blocks.insert(genesis.digest(), genesis);
        Ok(sim)
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn committee_for(&self, height: u64) -> Committee {
        let epoch = height.saturating_sub(1) / self.params.rotation;
        let secrets: Vec<FieldElement> = (0..self.params.committee_size as u64)
            .map(|i| derive_fe(self.params.seed, b"secret", epoch * 1_000_003 + i, &[]))
            .collect();
        let keys = secrets.iter().map(|s| toy_public_key(*s, self.params.rounds)).collect();
        Committee { secrets, keys }
    }

    /// The committee that signs headers at `height`.
    pub fn keys_for(&self, height: u64) -> Vec<FieldElement> {
        self.committee_for(height).keys
    }

    fn build(&self, parent: Option<&BlockHeader>, mut txs: Vec<Vec<u8>>, salt: u64) -> Result<Block> {
        let height = parent.map_or(1, |p| p.height + 1);
        let mut coinbase = format!("coinbase|{height}").into_bytes();
        if salt > 0 {
            coinbase.extend(format!("|fork{salt}").bytes());
        }
        txs.insert(0, coinbase);
        let mut header = BlockHeader {
            height,
            parent: parent.map_or([0; 32], BlockHeader::digest),
            tx_root: mt_commit(&txs)?,
            validator_commitment: self.committee_for(height + 1).commitment(),
            signatures: Vec::new(),
        };
        let digest = header.digest();
        let committee = self.committee_for(height);
        let mut witnesses = Vec::new();
        for i in 0..self.params.signers {
            let secret = committee.secrets[i];
            let nonce = derive_fe(self.params.seed, b"nonce", i as u64, &digest);
            header.signatures.push(HeaderSignature {
                signer: i as u32,
                signature: toy_sign(secret, nonce, &digest, self.params.rounds),
            });
            witnesses.push(SignerWitness { secret, nonce });
        }
        Ok(Block { header, txs, witnesses })
    }

    /// Extends the canonical chain. The first transaction of every block is
    /// a coinbase marker, so user transactions start at index 1.
    pub fn produce_block(&mut self, txs: Vec<Vec<u8>>) -> Result<&Block> {
        let tip = self.tip().header.clone();
        let block = self.build(Some(&tip), txs, 0)?;
        let d = block.digest();
        self.canonical.push(d);
        self.blocks.insert(d, block);
        Ok(&self.blocks[&d])
    }

    /// A validly signed block off the canonical chain, child of `parent`.
    pub fn produce_fork(&mut self, parent: &Digest, txs: Vec<Vec<u8>>) -> Result<&Block> {
        let parent = self.blocks.get(parent).ok_or_else(|| Error::InvalidArgument("unknown parent".into()))?.header.clone();
        self.forks += 1;
        let block = self.build(Some(&parent), txs, self.forks)?;
        let d = block.digest();
        self.blocks.insert(d, block);
        Ok(&self.blocks[&d])
    }

    pub fn tip(&self) -> &Block {
        &self.blocks[self.canonical.last().unwrap()]
    }

    pub fn genesis(&self) -> &Block {
        &self.blocks[&self.canonical[0]]
    }

    pub fn block(&self, digest: &Digest) -> Option<&Block> {
        self.blocks.get(digest)
    }

    /// Canonical block at `height`.
    pub fn at_height(&self, height: u64) -> Option<&Block> {
        let i = usize::try_from(height).ok()?.checked_sub(1)?;
        self.canonical.get(i).map(|d| &self.blocks[d])
    }

    pub fn canonical(&self) -> &[Digest] {
        &self.canonical
    }

    /// The canonical child of `digest`, if produced yet.
    pub fn canonical_child(&self, digest: &Digest) -> Option<&Block> {
        let i = self.canonical.iter().position(|d| d == digest)?;
        self.canonical.get(i + 1).map(|d| &self.blocks[d])
    }

    /// A random byte string usable as a transaction.
    pub fn random_tx<R: Rng>(rng: &mut R) -> Vec<u8> {
        let len = rng.gen_range(8..40);
        (0..len).map(|_| rng.gen()).collect()
    }

    pub fn seeded_rng(&self, stream: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.params.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::mt_verify;

    pub(crate) fn params() -> ChainParams {
        ChainParams { committee_size: 4, signers: 3, rotation: 3, rounds: 8, seed: 1 }
    }

    #[test]
    fn genesis_and_linkage() {
        let mut sim = ChainSim::new(params()).unwrap();
        assert_eq!(sim.genesis().header.height, 1);
        assert_eq!(sim.genesis().header.parent, [0; 32]);
        let g = sim.genesis().digest();
        let b = sim.produce_block(vec![b"a".to_vec()]).unwrap().clone();
        assert_eq!(b.header.parent, g);
        assert_eq!(b.header.height, 2);
        assert_eq!(sim.canonical_child(&g).unwrap(), &b);
        assert!(b.header.signers_distinct());
    }

    #[test]
    fn tx_paths_verify() {
        let mut sim = ChainSim::new(params()).unwrap();
        let txs: Vec<Vec<u8>> = (0..4u8).map(|i| vec![i; 5]).collect();
        let b = sim.produce_block(txs).unwrap().clone();
        for (i, tx) in b.txs.iter().enumerate() {
            assert!(mt_verify(&b.tx_path(i).unwrap(), tx, &b.header.tx_root));
        }
    }

    #[test]
    fn forks_have_distinct_digests() {
        let mut sim = ChainSim::new(params()).unwrap();
        let g = sim.genesis().digest();
        let a = sim.produce_fork(&g, vec![]).unwrap().digest();
        let b = sim.produce_fork(&g, vec![]).unwrap().digest();
        let c = sim.produce_block(vec![]).unwrap().digest();
        assert!(a != b && b != c && a != c);
        assert_eq!(sim.canonical().len(), 2);
    }

    #[test]
    fn committee_rotates_and_is_committed_one_block_ahead() {
        let mut sim = ChainSim::new(params()).unwrap();
        for _ in 0..6 {
            sim.produce_block(vec![]).unwrap();
        }
        assert_eq!(sim.keys_for(1), sim.keys_for(3));
        assert_ne!(sim.keys_for(3), sim.keys_for(4));
        for h in 1..7 {
            let b = sim.at_height(h).unwrap();
            assert_eq!(b.header.validator_commitment, committee_commitment(&sim.keys_for(h + 1)));
        }
    }

    #[test]
    fn header_bytes_round_trip() {
        let sim = ChainSim::new(params()).unwrap();
        let h = sim.genesis().header.clone();
        let bytes = h.to_bytes();
        let mut r = Reader::new(&bytes);
        assert_eq!(BlockHeader::read(&mut r).unwrap(), h);
        r.finish().unwrap();
    }
}
