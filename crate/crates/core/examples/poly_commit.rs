//! Commit to a multilinear table and open it at a random point.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use zkbridge::field::{FieldElement, MultilinearTable};
use zkbridge::iop::Transcript;
use zkbridge::pc::{pc_commit, pc_open, pc_verify, PcParams};

fn main() -> zkbridge::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let log_size = 8;
    let table = MultilinearTable::new((0..1 << log_size).map(|_| FieldElement::random(&mut rng)).collect())?;
    let params = PcParams::with_defaults(log_size)?;
    let (com, mut state) = pc_commit(&table, &params)?;
    let point: Vec<FieldElement> = (0..log_size).map(|_| FieldElement::random(&mut rng)).collect();

    let (value, proof) = pc_open(&mut state, &point, &mut Transcript::new(b"example", b"pc"))?;
    println!("value matches table: {}", value == table.evaluate(&point)?);
    println!("{} queries, {} bytes of proof", proof.queries.len(), proof.to_bytes().len());
    let ok = pc_verify(&com, &point, value, &proof, &params, &mut Transcript::new(b"example", b"pc"));
    println!("opening verifies: {ok}");
    let bad = pc_verify(&com, &point, value + FieldElement::ONE, &proof, &params, &mut Transcript::new(b"example", b"pc"));
    println!("wrong value verifies: {bad}");
    Ok(())
}
