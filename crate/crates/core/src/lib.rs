//! Simulator and experiment harness for quantum value iteration on tabular
//! discounted MDPs.
//!
//! The exact MDP layer ([`mdp`], [`hard_instances`]) is generic over
//! [`Scalar`]; the stochastic layers (oracles, estimators, solvers, sweeps)
//! run in `f64`.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod hard_instances;
pub mod mdp;
pub mod oracle;
pub mod quantum_sim;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use mdp::{Mdp, Policy, QVec, ValueVec};
pub use oracle::{QueryLedger, SampleOracle};
pub use scalar::Scalar;

pub type Mdp64 = Mdp<f64>;
pub type Mdp32 = Mdp<f32>;
pub type ValueVec64 = ValueVec<f64>;
pub type ValueVec32 = ValueVec<f32>;
pub type QVec64 = QVec<f64>;
pub type QVec32 = QVec<f32>;
