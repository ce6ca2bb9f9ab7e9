//! A desk-scale zero-knowledge bridge stack.
//!
//! The proof side is built bottom-up: prime-field arithmetic and FFTs
//! ([`field`]), Merkle vector commitments ([`merkle`]), layered arithmetic
//! circuits ([`circuit`]), the sumcheck and GKR interactive proofs made
//! non-interactive with a hash transcript ([`iop`]), a FRI-based commitment to
//! multilinear polynomials ([`pc`]) and the distributed prover that splits a
//! data-parallel circuit across a cluster of workers ([`devirgo`]).
//!
//! The chain side ([`bridge`]) simulates a sender chain with a rotating
//! signing committee, relays that prove each header valid, and an updater
//! state machine that keeps a DAG of proven headers on the receiving chain.

pub mod bridge;
pub mod circuit;
pub mod cli;
pub mod codec;
pub mod devirgo;
pub mod error;
pub mod field;
pub mod iop;
pub mod merkle;
pub mod pc;

pub use error::{Error, Result};
