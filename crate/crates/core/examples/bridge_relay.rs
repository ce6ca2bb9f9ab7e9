//! A sender chain, two relays taking turns, and an updater contract tracking
//! the headers. One forged envelope is rejected along the way.

use zkbridge::bridge::{round_robin_step, ChainParams, ChainSim, FullNode, HeaderId, Prover, Relay, Updater, UpdaterConfig};

fn main() -> zkbridge::Result<()> {
    let params = ChainParams { committee_size: 4, signers: 3, rotation: 3, rounds: 8, seed: 21 };
    let config = UpdaterConfig::default();
    let mut chain = ChainSim::new(params)?;
    let genesis = chain.genesis().clone();
    let mut updater = Updater::new(genesis.header.clone(), config);
    let mut relays: Vec<Relay> = ["relay-a", "relay-b"]
        .into_iter()
        .map(|id| Relay::new(id, genesis.digest(), params.rounds, config.proof, Prover::Local))
        .collect();
    let nodes = [FullNode::HONEST; 3];

    for _ in 0..6 {
        chain.produce_block(vec![b"payload".to_vec()])?;
        match round_robin_step(&mut relays, &chain, &nodes, &mut updater) {
            Some(i) => println!("height {} relayed by relay {i}", updater.dag().best().height),
            None => println!("no relay made progress"),
        }
    }

    // Re-prove the latest header under another identity, then swap the identity back.
    let tip = chain.tip().clone();
    let mut forger = Relay::new("forger", tip.header.parent, params.rounds, config.proof, Prover::Local);
    let mut env = forger.prove(tip.header.parent, &[tip.clone()], vec![chain.keys_for(tip.header.height)])?;
    env.identity = b"relay-a".to_vec();
    println!("identity-swapped envelope: {:?}", updater.apply(&env));

    let c = updater.counters();
    println!("{} headers, {} proof checks, {} envelopes", updater.dag().len(), c.proof_checks, c.envelopes);
    for h in updater.dag().genesis().height..=updater.dag().best().height {
        let Some(v) = updater.get_header(HeaderId::Height(h)) else { continue };
        println!("  height {h}: confirmed {}", v.confirmed);
    }
    Ok(())
}
