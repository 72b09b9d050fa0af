//! Exact-distribution simulation of the two quantum subroutines.
//!
//! Amplitude estimation is sampled from its closed-form measurement
//! distribution, and Dürr–Høyer maximum finding is run threshold by threshold
//! with analytic Grover success probabilities. Neither evolves a statevector.

mod amplitude;
mod maxfind;

pub use amplitude::{
    amplitude_estimation_sample, median, median_of_runs, outcome_distribution, outcome_probability,
    powering_repeats, AmplitudeEstimationConfig, AmplitudeSample, MAX_PHASE_BITS,
};
pub use maxfind::{qargmax_budget, qargmax_simulate, MaxFindingTrace, DEFAULT_C_MAX};
