//! Quantum value iteration (`solve_mdp1`, `solve_mdp2`) and the sampled
//! value-iteration baseline.
//!
//! Every solver reads the MDP only through a [`SampleOracle`], charges each
//! estimate to the oracle's ledger under a phase label, and returns a
//! [`SolveReport`] carrying the outputs, the ledger and run diagnostics.

mod baseline;
mod mdp1;
mod mdp2;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{qest1_charge, EstimatorConfig};
use crate::mdp::{effective_horizon, Mdp, Policy};
use crate::oracle::{QueryLedger, SampleOracle};
use crate::quantum_sim::qargmax_simulate;

pub use baseline::{standard_sampled_vi, BaselineMode, BaselineParams};
pub use mdp1::{solve_mdp1, SolveParams1};
pub use mdp2::{solve_mdp2, SolveParams2};

/// Largest action count the statevector maximum-finding backend accepts.
pub const STATEVECTOR_MAX_ACTIONS: usize = 64;

/// `⌈Γ·⌈ln(4Γ/ε)⌉ + 1⌉`.
pub fn iteration_count(horizon: f64, eps: f64) -> u64 {
    (horizon * (4.0 * horizon / eps).ln().ceil() + 1.0).ceil() as u64
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::param("delta", format!("{delta} not in (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QargmaxBackend {
    /// True argmax of the encoded row with probability `1 − f`.
    #[default]
    ContractMock,
    /// Dürr–Høyer simulation; `A ≤ 64`.
    Statevector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub record_snapshots: bool,
    pub qargmax_backend: QargmaxBackend,
    pub c_max: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            record_snapshots: false,
            qargmax_backend: QargmaxBackend::ContractMock,
            c_max: crate::quantum_sim::DEFAULT_C_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: u64,
    pub v: Vec<f64>,
    pub pi: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Iterations where some `v[s]` decreased.
    pub monotonicity_violations: u64,
    /// Iterations where `v_l < v(q_{l−1})` somewhere.
    pub greedy_dominance_violations: u64,
    /// Entries where the one-sided estimate exceeded the exact `Pv`.
    pub one_sided_violations: u64,
    /// Mean estimates that missed by at least their error radius.
    pub estimator_failures: u64,
    pub qargmax_failures: u64,
    /// `qest2` calls whose variance bound was below the true variance.
    pub variance_promise_violations: u64,
    /// Value-map entries clipped into an estimator's promise range, plus
    /// q entries clamped to `[0, Γ]` from above.
    pub clipped_entries: u64,
    /// `v_{k,L}` at the end of each epoch.
    pub epoch_values: Vec<Vec<f64>>,
    /// Per epoch, `max |y_k − σ²(v_{k,0})|` over `(s, a)`.
    pub variance_slack: Vec<f64>,
}

impl Diagnostics {
    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations == 0
    }

    pub fn any_failure(&self) -> bool {
        self.estimator_failures > 0 || self.qargmax_failures > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub v_hat: Vec<f64>,
    pub pi_hat: Policy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_hat: Option<Vec<Vec<f64>>>,
    pub ledger: QueryLedger,
    pub params: serde_json::Value,
    pub seed: u64,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<Snapshot>,
    /// Wall-clock creation time; the only field that differs between reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Snapshot rows `iteration,s,v,pi`.
    pub fn write_snapshots_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["iteration", "s", "v", "pi"])?;
        for snap in &self.snapshots {
            for (s, (v, pi)) in snap.v.iter().zip(&snap.pi).enumerate() {
                writer.write_record([
                    snap.iteration.to_string(),
                    s.to_string(),
                    v.to_string(),
                    pi.to_string(),
                ])?;
            }
        }
        writer.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Iterate bookkeeping shared by the monotone solvers.
struct Trace {
    record: bool,
    iteration: u64,
    snapshots: Vec<Snapshot>,
    diagnostics: Diagnostics,
}

impl Trace {
    fn new(record: bool) -> Self {
        Trace {
            record,
            iteration: 0,
            snapshots: Vec::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    fn push(&mut self, prev: &[f64], v: &[f64], pi: &Policy) {
        self.iteration += 1;
        if v.iter().zip(prev).any(|(new, old)| new < old) {
            self.diagnostics.monotonicity_violations += 1;
        }
        if self.record {
            self.snapshots.push(Snapshot {
                iteration: self.iteration,
                v: v.to_vec(),
                pi: pi.0.clone(),
            });
        }
    }
}

/// The if-then-else update: keep `candidate[s]` only where it does not
/// decrease `v[s]`.
fn monotone_update(v: &mut [f64], pi: &mut Policy, candidate: &[f64], candidate_pi: &Policy) {
    for s in 0..v.len() {
        if candidate[s] >= v[s] {
            v[s] = candidate[s];
            pi.0[s] = candidate_pi[s];
        }
    }
}

fn clamp_into(values: &[f64], hi: f64, clipped: &mut u64) -> Vec<f64> {
    values
        .iter()
        .map(|&x| {
            if x < 0.0 || x > hi {
                *clipped += 1;
            }
            x.clamp(0.0, hi)
        })
        .collect()
}

fn clamp_q(x: f64, horizon: f64, clipped: &mut u64) -> f64 {
    if x > horizon {
        *clipped += 1;
    }
    x.clamp(0.0, horizon)
}

fn horizon_of(mdp: &Mdp<f64>) -> f64 {
    effective_horizon(mdp.discount())
}

/// Query cost of one call to the oracle encoding a row of
/// `q = max(r + γ·z, 0)`: one call to the `z` estimator and one to its
/// inverse.
fn q_encoding_cost(horizon: f64, eps: f64, f: f64, cfg: &EstimatorConfig) -> u64 {
    2 * qest1_charge(horizon, eps, f, cfg.c1)
}

/// Contract-mock maximum finding: probes, then the true argmax (lowest index
/// on ties) with probability `1 − f`, otherwise a uniformly random other
/// index.
struct ArgmaxOutcome {
    index: usize,
    probes: u64,
    failed: bool,
}

fn qargmax<R: Rng + ?Sized>(
    row: &[f64],
    f: f64,
    options: &SolveOptions,
    rng: &mut R,
) -> Result<ArgmaxOutcome> {
    let best = crate::mdp::greedy(&crate::mdp::QVec {
        num_actions: row.len(),
        values: row.to_vec(),
    })?
    .1[0];
    match options.qargmax_backend {
        QargmaxBackend::ContractMock => {
            let probes = (options.c_max * (row.len() as f64).sqrt() * (1.0 / f).log2()).ceil() as u64;
            let fails = row.len() > 1 && rng.random::<f64>() < f;
            let index = if fails {
                let other = rng.random_range(0..row.len() - 1);
                if other >= best {
                    other + 1
                } else {
                    other
                }
            } else {
                best
            };
            Ok(ArgmaxOutcome {
                index,
                probes,
                failed: fails,
            })
        }
        QargmaxBackend::Statevector => {
            if row.len() > STATEVECTOR_MAX_ACTIONS {
                return Err(Error::param(
                    "qargmax_backend",
                    format!("statevector maximum finding supports A ≤ {STATEVECTOR_MAX_ACTIONS}"),
                ));
            }
            let (index, trace) = qargmax_simulate(row, f, options.c_max, rng)?;
            Ok(ArgmaxOutcome {
                index,
                probes: trace.grover_queries_charged,
                failed: index != best,
            })
        }
    }
}

fn phase_label(parts: &[&dyn std::fmt::Display]) -> String {
    parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("-")
}

fn q_rows(values: &[f64], num_actions: usize) -> Vec<Vec<f64>> {
    values.chunks(num_actions).map(<[f64]>::to_vec).collect()
}

fn oracle_context(oracle: &SampleOracle<'_>) -> (usize, usize) {
    (oracle.mdp().num_states(), oracle.mdp().num_actions())
}
