//! Prove a batch of signature checks with 1, 2 and 4 in-process workers and
//! compare against the single-process prover.

use std::time::Instant;

use zkbridge::circuit::light_client::{build_light_client_circuit, circuit_input, LightClientParams};
use zkbridge::cli::sample_instances;
use zkbridge::devirgo::{devirgo_prove, devirgo_verify, split_input, virgo_prove, Cluster, ProofConfig};

fn main() -> zkbridge::Result<()> {
    let params = LightClientParams { signatures: 16, rounds: 8 };
    let circuit = build_light_client_circuit(params)?;
    let input = circuit_input(&sample_instances(params.signatures, params.rounds, 42));
    let config = ProofConfig::default();
    let id = b"example-prover";

    let (outputs, reference) = virgo_prove(&circuit, &input, id, &config)?;
    let (public, _) = split_input(&circuit, &input)?;
    println!("single process: {} bytes, verifies {}", reference.to_bytes().len(), devirgo_verify(&circuit, &public, &outputs, &reference, id, &config));

    for workers in [1, 2, 4] {
        let mut cluster = Cluster::in_process(workers)?;
        let start = Instant::now();
        let (_, proof) = devirgo_prove(&mut cluster, &circuit, &input, id, &config)?;
        let elapsed = start.elapsed();
        let gates = cluster.setup_gate_evals().iter().max().copied().unwrap_or(0);
        let stats = cluster.stats();
        println!(
            "{workers} workers: {:>7.1} ms, max gates per worker {gates}, {} bytes sent, identical to single process: {}",
            elapsed.as_secs_f64() * 1e3,
            stats.bytes_sent,
            proof == reference
        );
    }
    Ok(())
}
