//! Sumcheck on a product of tables, then GKR on a small layered circuit.

use zkbridge::circuit::{Gate, LayeredCircuit};
use zkbridge::field::{fe, FieldElement};
use zkbridge::iop::{gkr_prove, gkr_verify, sumcheck_prove, sumcheck_verify, ProductSum, RawInput, Transcript};

fn main() -> zkbridge::Result<()> {
    let a: Vec<FieldElement> = (1..=8).map(fe).collect();
    let b: Vec<FieldElement> = (1..=8).map(|i| fe(i * i)).collect();
    let c = vec![FieldElement::ONE; 8];
    let f = ProductSum::new(a, b, c)?;
    let claim = f.sum();
    let proof = sumcheck_prove(f.clone(), &mut Transcript::new(b"example", b"sumcheck"));
    let ok = sumcheck_verify(claim, &proof, 3, |p| f.evaluate(p), &mut Transcript::new(b"example", b"sumcheck"));
    println!("sumcheck of sum i^3 for i in 1..=8 = {} verifies: {ok}", claim.value());

    // out = (x0 * x1) + (x2 + x3)
    let circuit = LayeredCircuit::new(vec![vec![Gate::add(0, 1)], vec![Gate::mul(0, 1), Gate::add(2, 3)]], 4)?;
    let input = [fe(6), fe(7), fe(1), fe(2)];
    let (proof, _, values) = gkr_prove(&circuit, &input, &mut Transcript::new(b"example", b"gkr"))?;
    let out = values.output().to_vec();
    let ok = gkr_verify(&circuit, &out, &proof, &mut RawInput(&input), &mut Transcript::new(b"example", b"gkr"));
    println!("gkr output {} verifies: {ok}", out[0].value());
    let wrong = [fe(out[0].value() + 1)];
    let bad = gkr_verify(&circuit, &wrong, &proof, &mut RawInput(&input), &mut Transcript::new(b"example", b"gkr"));
    println!("claiming {} instead verifies: {bad}", wrong[0].value());
    Ok(())
}
