//! SHA-256 binary Merkle trees.
//!
//! Leaves are hashed as `H(0x00 || len as u64 LE || leaf)` and inner nodes as
//! `H(0x01 || left || right)`. Trees with a non power-of-two leaf count are
//! padded with the hash of the empty leaf.

use sha2::{Digest as _, Sha256};

use crate::codec::{Reader, Writer};
use crate::error::{invalid, Result};

pub type Digest = [u8; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MerkleRoot(pub Digest);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerklePath {
    pub leaf_index: u64,
    /// Sibling digests from the leaf level up to just below the root.
    pub siblings: Vec<Digest>,
}

pub fn hash_leaf(leaf: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([0x00]);
    h.update((leaf.len() as u64).to_le_bytes());
    h.update(leaf);
    h.finalize().into()
}

pub fn hash_node(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([0x01]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// A fully materialised tree; `levels[0]` are the (padded) leaf hashes and the
/// last level holds the root.
#[derive(Clone, Debug)]
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
    leaf_count: usize,
}

impl MerkleTree {
    pub fn from_leaves<T: AsRef<[u8]>>(leaves: &[T]) -> Result<Self> {
        let hashes: Vec<Digest> = leaves.iter().map(|l| hash_leaf(l.as_ref())).collect();
        Self::from_leaf_hashes(hashes)
    }

    pub fn from_leaf_hashes(mut hashes: Vec<Digest>) -> Result<Self> {
        if hashes.is_empty() {
            return invalid("cannot commit to an empty vector");
        }
        let leaf_count = hashes.len();
        hashes.resize(leaf_count.next_power_of_two(), hash_leaf(&[]));
        let mut levels = vec![hashes];
        while levels.last().unwrap().len() > 1 {
            let next = levels
                .last()
                .unwrap()
                .chunks(2)
                .map(|p| hash_node(&p[0], &p[1]))
                .collect();
            levels.push(next);
        }
        Ok(Self { levels, leaf_count })
    }

    pub fn root(&self) -> MerkleRoot {
        MerkleRoot(self.levels.last().unwrap()[0])
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn path(&self, index: usize) -> Result<MerklePath> {
        if index >= self.leaf_count {
            return invalid(format!("leaf index {index} out of range for {} leaves", self.leaf_count));
        }
        let siblings = self.levels[..self.depth()]
            .iter()
            .enumerate()
            .map(|(level, hashes)| hashes[(index >> level) ^ 1])
            .collect();
        Ok(MerklePath {
            leaf_index: index as u64,
            siblings,
        })
    }
}

pub fn mt_commit<T: AsRef<[u8]>>(leaves: &[T]) -> Result<MerkleRoot> {
    Ok(MerkleTree::from_leaves(leaves)?.root())
}

pub fn mt_open<T: AsRef<[u8]>>(leaves: &[T], index: usize) -> Result<(Vec<u8>, MerklePath)> {
    let tree = MerkleTree::from_leaves(leaves)?;
    let path = tree.path(index)?;
    Ok((leaves[index].as_ref().to_vec(), path))
}

pub fn mt_verify(path: &MerklePath, leaf: &[u8], root: &MerkleRoot) -> bool {
    verify_leaf_hash(path, &hash_leaf(leaf), root)
}

/// Like [`mt_verify`] for callers that already hold the leaf hash.
pub fn verify_leaf_hash(path: &MerklePath, leaf_hash: &Digest, root: &MerkleRoot) -> bool {
    let depth = path.siblings.len();
    if depth >= 64 || path.leaf_index >> depth != 0 {
        return false;
    }
    let mut acc = *leaf_hash;
    for (level, sib) in path.siblings.iter().enumerate() {
        acc = if (path.leaf_index >> level) & 1 == 0 {
            hash_node(&acc, sib)
        } else {
            hash_node(sib, &acc)
        };
    }
    acc == root.0
}

impl MerklePath {
    pub fn write(&self, w: &mut Writer) {
        w.u64(self.leaf_index).u16(self.siblings.len() as u16);
        for s in &self.siblings {
            w.digest(s);
        }
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let leaf_index = r.u64()?;
        let count = r.u16()? as usize;
        let siblings = (0..count).map(|_| r.digest()).collect::<Result<_>>()?;
        Ok(Self { leaf_index, siblings })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let p = Self::read(&mut r)?;
        r.finish()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sha(parts: &[&[u8]]) -> Digest {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().into()
    }

    fn leaves(n: usize) -> Vec<Vec<u8>> {
        (0..n).map(|i| format!("leaf-{i}").into_bytes()).collect()
    }

    #[test]
    fn single_leaf_root_is_leaf_hash() {
        let root = mt_commit(&[b"abc"]).unwrap();
        assert_eq!(root.0, sha(&[&[0], &3u64.to_le_bytes(), b"abc"]));
        let (_, path) = mt_open(&[b"abc"], 0).unwrap();
        assert!(path.siblings.is_empty());
    }

    #[test]
    fn four_leaves_match_hand_rolled_tree() {
        let l = leaves(4);
        let lh: Vec<Digest> = l
            .iter()
            .map(|x| sha(&[&[0], &(x.len() as u64).to_le_bytes(), x]))
            .collect();
        let n01 = sha(&[&[1], &lh[0], &lh[1]]);
        let n23 = sha(&[&[1], &lh[2], &lh[3]]);
        assert_eq!(mt_commit(&l).unwrap().0, sha(&[&[1], &n01, &n23]));
    }

    #[test]
    fn swapping_leaves_changes_root() {
        let mut l = leaves(4);
        let a = mt_commit(&l).unwrap();
        l.swap(0, 3);
        assert_ne!(a, mt_commit(&l).unwrap());
    }

    #[test]
    fn errors() {
        assert!(mt_commit::<Vec<u8>>(&[]).is_err());
        assert!(mt_open(&leaves(3), 3).is_err());
    }

    #[test]
    fn completeness_exhaustive() {
        for n in 1..=64 {
            let l = leaves(n);
            let tree = MerkleTree::from_leaves(&l).unwrap();
            let expected_depth = (n as f64).log2().ceil() as usize;
            for (i, leaf) in l.iter().enumerate() {
                let p = tree.path(i).unwrap();
                assert_eq!(p.siblings.len(), expected_depth);
                assert!(mt_verify(&p, leaf, &tree.root()));
            }
        }
    }

    #[test]
    fn wrong_index_rejected_exhaustive() {
        for n in 2..=8 {
            let l = leaves(n);
            let root = mt_commit(&l).unwrap();
            for i in 0..n {
                let (leaf, path) = mt_open(&l, i).unwrap();
                for j in 0..n.next_power_of_two() + 2 {
                    let moved = MerklePath { leaf_index: j as u64, ..path.clone() };
                    assert_eq!(mt_verify(&moved, &leaf, &root), i == j, "n={n} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn path_bytes_round_trip() {
        let (_, p) = mt_open(&leaves(5), 3).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(bytes.len(), 8 + 2 + 32 * 3);
        assert_eq!(MerklePath::from_bytes(&bytes).unwrap(), p);
    }

    proptest! {
        #[test]
        fn any_single_bit_flip_rejects(n in 2usize..20, i in 0usize..20, bit in 0usize..4096) {
            let i = i % n;
            let l = leaves(n);
            let root = mt_commit(&l).unwrap();
            let (leaf, path) = mt_open(&l, i).unwrap();
            let mut bytes = path.to_bytes();
            let mut leaf = leaf;
            let total = (bytes.len() + leaf.len()) * 8;
            let bit = bit % total;
            if bit < leaf.len() * 8 {
                leaf[bit / 8] ^= 1 << (bit % 8);
            } else {
                let b = bit - leaf.len() * 8;
                bytes[b / 8] ^= 1 << (b % 8);
            }
            let accepted = match MerklePath::from_bytes(&bytes) {
                Ok(p) => mt_verify(&p, &leaf, &root),
                Err(_) => false,
            };
            prop_assert!(!accepted);
        }
    }
}
