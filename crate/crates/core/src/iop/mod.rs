//! Interactive proofs made non-interactive with a hash transcript: the
//! sumcheck protocol and GKR on layered circuits.

pub mod gkr;
pub mod sumcheck;
mod transcript;

pub use gkr::{gkr_prove, gkr_verify, GkrProof, InputClaim, InputOracle, LayerProof, RawInput};
pub use sumcheck::{sumcheck_prove, sumcheck_verify, ProductSum, SumcheckBackend, SumcheckProof};
pub use transcript::Transcript;
