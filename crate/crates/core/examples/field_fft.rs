//! Goldilocks arithmetic, FFT round trips and multilinear extensions.

use zkbridge::field::{fe, fft_evaluate, ifft_interpolate, mle_evaluate, EvaluationDomain, FieldElement, MultilinearTable};

fn main() -> zkbridge::Result<()> {
    let a = fe(0xdead_beef);
    let inv = a.inverse().expect("nonzero");
    println!("a * a^-1 = {}", (a * inv).value());
    println!("2^64 mod p = {}", fe(2).pow(64).value());

    // Evaluate 1 + 2x + 3x^2 + 4x^3 on an 8-point subgroup and interpolate back.
    let coeffs: Vec<FieldElement> = (1..=4).map(fe).collect();
    let domain = EvaluationDomain::subgroup(3)?;
    let evals = fft_evaluate(&coeffs, &domain)?;
    let back = ifft_interpolate(&evals, &domain)?;
    println!("fft/ifft round trip: {}", back[..4] == coeffs[..] && back[4..].iter().all(|c| c.is_zero()));

    // A multilinear extension agrees with its table on the hypercube.
    let table = MultilinearTable::new((10..18).map(fe).collect())?;
    let at_5 = mle_evaluate(&table, &[fe(1), fe(0), fe(1)])?;
    println!("mle(1,0,1) = {} (table[5] = 15)", at_5.value());
    let r = [fe(3), fe(5), fe(7)];
    println!("mle at a random point = {}", table.evaluate(&r)?.value());
    Ok(())
}
