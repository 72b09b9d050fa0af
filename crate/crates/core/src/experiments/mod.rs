//! Config-driven experiment harness behind the `qmdp` binary: single solves,
//! parameter sweeps with log–log scaling fits, and invariant suites.

mod fit;
mod sweep;
mod verify;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::hard_instances::{copies, HardInstanceSpec};
use crate::mdp::{effective_horizon, exact_value_iteration, policy_value_exact, Mdp};
use crate::oracle::SampleOracle;
use crate::solvers::{
    solve_mdp1, solve_mdp2, standard_sampled_vi, BaselineMode, BaselineParams, QargmaxBackend,
    SolveOptions, SolveParams1, SolveParams2, SolveReport,
};

pub use fit::{fit_power_law, ScalingFit};
pub use sweep::{read_sweep_csv, run_sweep, write_sweep_csv, SweepAxis, SweepOutcome, SweepRow};
pub use verify::{run_suite, CheckResult, Suite, SUITES};

/// Tolerance used when comparing solver outputs against exact values.
pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub solver: SolverConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub seed: u64,
    /// Seeds per sweep point when the command line does not say.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_runs() -> usize {
    1
}

/// Exactly one of `mdp_path` and `hard_instance`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_instance: Option<HardInstanceSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    SolveMdp1,
    SolveMdp2,
    StandardSampledVi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Target error. Give this or `eps_over_sqrt_horizon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Target error as a multiple of `1/√Γ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_over_sqrt_horizon: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_mode")]
    pub mode: BaselineMode,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    #[serde(default)]
    pub qargmax_backend: QargmaxBackend,
    #[serde(default)]
    pub record_snapshots: bool,
}

fn default_delta() -> f64 {
    0.1
}
fn default_mode() -> BaselineMode {
    BaselineMode::Classical
}
fn default_b() -> f64 {
    1.0
}
fn default_c() -> f64 {
    0.01
}
fn default_c_max() -> f64 {
    crate::quantum_sim::DEFAULT_C_MAX
}

impl SolverConfig {
    pub fn new(kind: SolverKind, eps: f64) -> Self {
        SolverConfig {
            kind,
            eps: Some(eps),
            eps_over_sqrt_horizon: None,
            delta: default_delta(),
            mode: default_mode(),
            b: default_b(),
            c: default_c(),
            c_max: default_c_max(),
            qargmax_backend: QargmaxBackend::default(),
            record_snapshots: false,
        }
    }

    /// The target error for an instance of horizon `horizon`.
    pub fn eps_for(&self, horizon: f64) -> Result<f64> {
        match (self.eps, self.eps_over_sqrt_horizon) {
            (Some(eps), None) => Ok(eps),
            (None, Some(k)) => Ok(k / horizon.sqrt()),
            _ => Err(Error::Config(
                "solver: exactly one of eps and eps_over_sqrt_horizon must be set".into(),
            )),
        }
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            record_snapshots: self.record_snapshots,
            qargmax_backend: self.qargmax_backend,
            c_max: self.c_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots_csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("at {path} (line {}, column {}): {inner}", inner.line(), inner.column()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; a relative `mdp_path` is taken relative to the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))?;
        if let Some(mdp_path) = &mut config.instance.mdp_path {
            if mdp_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *mdp_path = dir.join(&*mdp_path);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.instance.mdp_path, &self.instance.hard_instance) {
            (Some(_), None) => {}
            (None, Some(spec)) => spec.validate().map_err(|e| e.context("instance.hard_instance"))?,
            _ => {
                return Err(Error::Config(
                    "instance: exactly one of mdp_path and hard_instance must be set".into(),
                ))
            }
        }
        self.solver.eps_for(1.0)?;
        self.estimator.validate().map_err(|e| e.context("estimator"))?;
        if self.runs == 0 {
            return Err(Error::Config("runs: must be at least 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep.values: must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn build_mdp(&self) -> Result<Mdp<f64>> {
        match (&self.instance.mdp_path, &self.instance.hard_instance) {
            (Some(path), None) => Mdp::load(path),
            (None, Some(spec)) => copies(spec),
            _ => Err(Error::Config(
                "instance: exactly one of mdp_path and hard_instance must be set".into(),
            )),
        }
    }

    /// Runs the configured solver once with `seed`.
    pub fn solve(&self, mdp: &Mdp<f64>, seed: u64) -> Result<SolveReport> {
        run_solver(mdp, &self.solver, &self.estimator, seed)
    }
}

pub fn run_solver(mdp: &Mdp<f64>, solver: &SolverConfig, estimator: &EstimatorConfig, seed: u64) -> Result<SolveReport> {
    let horizon = effective_horizon(mdp.discount());
    let eps = solver.eps_for(horizon)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let options = solver.options();
    let mut oracle = SampleOracle::new(mdp, seed);
    match solver.kind {
        SolverKind::SolveMdp1 => {
            let params = SolveParams1::with_constants(eps, solver.delta, solver.b, solver.c, horizon, ns, na)?;
            solve_mdp1(&mut oracle, &params, estimator, &options)
        }
        SolverKind::SolveMdp2 => {
            let params = SolveParams2::with_c_max(eps, solver.delta, solver.c_max, horizon, ns, na)?;
            solve_mdp2(&mut oracle, &params, estimator, &options)
        }
        SolverKind::StandardSampledVi => {
            let params = BaselineParams::derive(eps, solver.delta, solver.mode, horizon, ns, na)?;
            standard_sampled_vi(&mut oracle, &params, estimator, &options)
        }
    }
}

/// Exact quantities a run is judged against.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub v_star: Vec<f64>,
    pub q_star: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn of(mdp: &Mdp<f64>) -> Result<Self> {
        let solution = exact_value_iteration(mdp, 1e-11)?;
        let na = mdp.num_actions();
        Ok(GroundTruth {
            v_star: solution.v.0,
            q_star: solution.q.values.chunks(na).map(<[f64]>::to_vec).collect(),
        })
    }
}

/// Whether a report meets its solver's guarantee:
/// `v* − ε ≤ v̂ ≤ v^π̂ ≤ v*` for both quantum solvers, additionally
/// `q* − ε ≤ q̂ ≤ q^π̂ ≤ q*` for `solve_mdp1`, and `‖v̂ − v*‖ ≤ ε` for the
/// baseline.
pub fn meets_guarantee(mdp: &Mdp<f64>, truth: &GroundTruth, report: &SolveReport, eps: f64) -> Result<bool> {
    let v_star = &truth.v_star;
    if report.solver == "standard_sampled_vi" {
        return Ok(report.v_hat.iter().zip(v_star).all(|(v, s)| (v - s).abs() <= eps + EXACT_TOL));
    }
    let v_pi = policy_value_exact(mdp, &report.pi_hat)?.0;
    let v_ok = (0..v_star.len()).all(|s| {
        v_star[s] - eps <= report.v_hat[s]
            && report.v_hat[s] <= v_pi[s] + 1e-9
            && v_pi[s] <= v_star[s] + EXACT_TOL
    });
    if !v_ok {
        return Ok(false);
    }
    let Some(q_hat) = &report.q_hat else {
        return Ok(true);
    };
    let gamma = mdp.discount();
    for (s, row) in q_hat.iter().enumerate() {
        for (a, &q) in row.iter().enumerate() {
            let q_pi = mdp.reward(s, a) + gamma * mdp.row(s, a).iter().zip(&v_pi).map(|(p, v)| p * v).sum::<f64>();
            let q_star = truth.q_star[s][a];
            if !(q_star - eps <= q && q <= q_pi + 1e-9 && q_pi <= q_star + EXACT_TOL) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Writes `file` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
