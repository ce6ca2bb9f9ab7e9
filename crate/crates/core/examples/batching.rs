//! Relay four headers in one proof and compare against one proof per header.

use zkbridge::bridge::{batch_prove_and_update, ChainParams, ChainSim, Prover, Relay, Updater, UpdaterConfig};

fn main() -> zkbridge::Result<()> {
    let params = ChainParams { committee_size: 4, signers: 4, rotation: 2, rounds: 8, seed: 8 };
    let config = UpdaterConfig::default();
    let mut chain = ChainSim::new(params)?;
    for i in 0..4u8 {
        chain.produce_block(vec![vec![i; 16]])?;
    }
    let blocks: Vec<_> = (2..=5).map(|h| chain.at_height(h).expect("produced").clone()).collect();
    let genesis = chain.genesis().clone();

    let mut batched = Updater::new(genesis.header.clone(), config);
    let mut relay = Relay::new("batcher", genesis.digest(), params.rounds, config.proof, Prover::Local);
    let ok = batch_prove_and_update(&mut relay, &mut batched, &blocks, &chain)?;
    println!("batch of 4 accepted: {ok}, proof checks {}", batched.counters().proof_checks);

    let mut single = Updater::new(genesis.header.clone(), config);
    let mut relay = Relay::new("single", genesis.digest(), params.rounds, config.proof, Prover::Local);
    for b in &blocks {
        batch_prove_and_update(&mut relay, &mut single, std::slice::from_ref(b), &chain)?;
    }
    println!("one by one: proof checks {}", single.counters().proof_checks);
    println!("same tip: {}", batched.dag().best() == single.dag().best());
    println!("batch roots stored: {:?}", batched.dag().batch_roots().keys().collect::<Vec<_>>());
    Ok(())
}
