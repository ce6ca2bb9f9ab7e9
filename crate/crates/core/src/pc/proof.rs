use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::merkle::{MerklePath, MerkleRoot};

/// The values of every copy at one position of `L`, with their path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnOpening {
    pub values: Vec<FieldElement>,
    pub path: MerklePath,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FriStep {
    pub pair: [FieldElement; 2],
    pub path: MerklePath,
}

/// Openings for one query position `k < |L|/2`: the committed columns at `k`
/// and `k + |L|/2`, then one pair per folding layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryProof {
    pub f: [ColumnOpening; 2],
    pub h: [ColumnOpening; 2],
    pub fri: Vec<FriStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcOpeningProof {
    /// `evals[p][i]`: copy `i` evaluated at point `p`.
    pub evals: Vec<Vec<FieldElement>>,
    pub h_root: MerkleRoot,
    pub fri_roots: Vec<MerkleRoot>,
    pub final_value: FieldElement,
    pub queries: Vec<QueryProof>,
}

impl PcOpeningProof {
    /// Merkle paths opened in total.
    pub fn path_count(&self) -> usize {
        self.queries.iter().map(|q| 4 + q.fri.len()).sum()
    }

    /// Paths into the witness commitment per opened position (one, whatever
    /// the number of copies).
    pub fn witness_paths_per_position(&self) -> usize {
        self.queries.first().map_or(0, |q| q.f.len() / 2)
    }

    pub fn write(&self, w: &mut Writer) {
        w.u32(self.evals.len() as u32);
        for e in &self.evals {
            w.fes(e);
        }
        w.digest(&self.h_root.0).u32(self.fri_roots.len() as u32);
        for r in &self.fri_roots {
            w.digest(&r.0);
        }
        w.fe(self.final_value).u32(self.queries.len() as u32);
        for q in &self.queries {
            for c in q.f.iter().chain(&q.h) {
                w.fes(&c.values);
                c.path.write(w);
            }
            w.u32(q.fri.len() as u32);
            for s in &q.fri {
                w.fe(s.pair[0]).fe(s.pair[1]);
                s.path.write(w);
            }
        }
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let count = |r: &mut Reader<'_>, max: usize, what: &str| -> Result<usize> {
            let n = r.u32()? as usize;
            if n > max {
                return Err(Error::Decode(format!("{n} {what}")));
            }
            Ok(n)
        };
        let points = count(r, 2, "evaluation points")?;
        let evals = (0..points).map(|_| r.fes(1 << 20)).collect::<Result<_>>()?;
        let h_root = MerkleRoot(r.digest()?);
        let nroots = count(r, 32, "folding roots")?;
        let fri_roots = (0..nroots).map(|_| Ok(MerkleRoot(r.digest()?))).collect::<Result<_>>()?;
        let final_value = r.fe()?;
        let nq = count(r, 1 << 12, "queries")?;
        let mut queries = Vec::with_capacity(nq);
        for _ in 0..nq {
            let mut col = || -> Result<ColumnOpening> {
                Ok(ColumnOpening { values: r.fes(1 << 20)?, path: MerklePath::read(r)? })
            };
            let f = [col()?, col()?];
            let h = [col()?, col()?];
            let steps = count(r, 32, "folding steps")?;
            let fri = (0..steps)
                .map(|_| Ok(FriStep { pair: [r.fe()?, r.fe()?], path: MerklePath::read(r)? }))
                .collect::<Result<_>>()?;
            queries.push(QueryProof { f, h, fri });
        }
        Ok(Self { evals, h_root, fri_roots, final_value, queries })
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
