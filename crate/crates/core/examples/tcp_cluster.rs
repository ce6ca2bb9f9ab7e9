//! Run two workers on loopback TCP and prove through them.

use std::net::TcpListener;
use std::thread;

use zkbridge::circuit::light_client::{build_light_client_circuit, circuit_input, LightClientParams};
use zkbridge::cli::sample_instances;
use zkbridge::devirgo::{devirgo_prove, serve, virgo_prove, Cluster, ProofConfig};

fn main() -> zkbridge::Result<()> {
    let config = ProofConfig::default();
    let cluster_config = config.cluster(2);
    let mut addrs = Vec::new();
    let mut workers = Vec::new();
    for _ in 0..2 {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        addrs.push(listener.local_addr()?.to_string());
        let hash = cluster_config.hash();
        workers.push(thread::spawn(move || serve(&listener, Some(hash), Some(1))));
    }
    println!("workers listening on {}", addrs.join(", "));

    let params = LightClientParams { signatures: 8, rounds: 8 };
    let circuit = build_light_client_circuit(params)?;
    let input = circuit_input(&sample_instances(params.signatures, params.rounds, 9));
    let mut cluster = Cluster::connect(&addrs, &cluster_config)?;
    let (_, proof) = devirgo_prove(&mut cluster, &circuit, &input, b"tcp-example", &config)?;
    drop(cluster);
    for w in workers {
        w.join().expect("worker thread")?;
    }
    let (_, local) = virgo_prove(&circuit, &input, b"tcp-example", &config)?;
    println!("proof over TCP equals local proof: {}", proof == local);
    Ok(())
}
