//! Generative-model access to an MDP.
//!
//! [`SampleOracle`] is the classical generative model with query accounting;
//! [`dyadic`] builds the amplitude table of the quantum generative model from
//! dyadic probability rows.

pub mod dyadic;
mod ledger;
mod sampler;

pub use dyadic::{
    build_quantum_oracle, build_reversible_map, quantize_row, DyadicAmplitude, DyadicMdp,
    DyadicMdpFile, DyadicMdpRow, QuantumGenerativeState, ReversibleMap, DEFAULT_QUANTIZATION_BITS,
};
pub use ledger::QueryLedger;
pub use sampler::SampleOracle;
