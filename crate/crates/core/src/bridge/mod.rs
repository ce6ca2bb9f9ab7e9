//! The simulated bridge: a sender chain, relays that prove its headers, and
//! the receiving chain's updater contract.

pub mod app;
pub mod chain;
pub mod envelope;
pub mod light_client;
pub mod relay;
pub mod scenario;
pub mod updater;

pub use chain::{Block, BlockHeader, ChainParams, ChainSim, HeaderSignature, SignerWitness};
pub use light_client::{light_cc, HeaderStatement, LightClientState, Quorum};
pub use envelope::RelayEnvelope;
pub use relay::{batch_prove_and_update, round_robin_step, FullNode, NodeBehavior, Prover, Relay, RelayError};
pub use updater::{main_chain, HeaderDag, HeaderId, HeaderView, Outcome, Rejection, Updater, UpdaterConfig};
pub use scenario::{Scenario, ScenarioReport};
