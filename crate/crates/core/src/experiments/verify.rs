use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hard_instances::{gap_check, multi_action, HardInstanceSpec, DEFAULT_C_ALPHA};
use crate::mdp::{effective_horizon, random_mdp, random_policy, total_variance_norm, Mdp};
use crate::oracle::{build_quantum_oracle, build_reversible_map, DyadicMdp};
use crate::rng::tagged_rng;
use crate::solvers::Snapshot;

use super::{meets_guarantee, run_solver, GroundTruth, SolverConfig, SolverKind};
use crate::estimators::EstimatorConfig;

pub const SUITES: [&str; 5] = [
    "total-variance",
    "monotone-iterates",
    "sandwich",
    "oracle-normalization",
    "gap-checks",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    TotalVariance,
    MonotoneIterates,
    Sandwich,
    OracleNormalization,
    GapChecks,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "total-variance" => Ok(Suite::TotalVariance),
            "monotone-iterates" => Ok(Suite::MonotoneIterates),
            "sandwich" => Ok(Suite::Sandwich),
            "oracle-normalization" => Ok(Suite::OracleNormalization),
            "gap-checks" => Ok(Suite::GapChecks),
            other => Err(Error::param(
                "suite",
                format!("unknown suite {other:?}; expected one of {}", SUITES.join(", ")),
            )),
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::TotalVariance => 1000,
            Suite::MonotoneIterates => 50,
            Suite::Sandwich => 200,
            Suite::OracleNormalization => 100,
            Suite::GapChecks => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: usize,
    pub total: usize,
    /// Passes needed for the check to hold.
    pub required: usize,
}

impl CheckResult {
    fn count(name: impl Into<String>, outcomes: &[bool], required: usize) -> Self {
        CheckResult {
            name: name.into(),
            passed: outcomes.iter().filter(|&&ok| ok).count(),
            total: outcomes.len(),
            required,
        }
    }

    fn all(name: impl Into<String>, outcomes: &[bool]) -> Self {
        Self::count(name, outcomes, outcomes.len())
    }

    pub fn ok(&self) -> bool {
        self.passed >= self.required
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}/{} (need {})",
            if self.ok() { "PASS" } else { "FAIL" },
            self.name,
            self.passed,
            self.total,
            self.required
        )
    }
}

const TOTAL_VARIANCE_GAMMAS: [f64; 3] = [0.9, 0.95, 0.99];
const POLICIES_PER_MDP: usize = 5;

pub fn run_suite(suite: Suite, trials: Option<usize>, seed: u64) -> Result<Vec<CheckResult>> {
    let trials = trials.unwrap_or(suite.default_trials());
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    match suite {
        Suite::TotalVariance => total_variance(trials, seed),
        Suite::MonotoneIterates => monotone_iterates(trials, seed),
        Suite::Sandwich => sandwich(trials, seed),
        Suite::OracleNormalization => oracle_normalization(trials, seed),
        Suite::GapChecks => gap_checks(),
    }
}

fn small_random_mdp(seed: u64, trial: usize, max_size: usize, gamma: f64) -> Result<Mdp<f64>> {
    let mut rng = tagged_rng(seed, &[trial as u64]);
    let ns = rng.random_range(1..=max_size);
    let na = rng.random_range(1..=max_size);
    random_mdp(&mut rng, ns, na, gamma)
}

fn total_variance(trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let gamma = TOTAL_VARIANCE_GAMMAS[t % TOTAL_VARIANCE_GAMMAS.len()];
            let mdp = small_random_mdp(seed, t, 8, gamma)?;
            let bound = 2f64.sqrt() * effective_horizon(gamma).powf(1.5);
            let mut rng = tagged_rng(seed, &[t as u64, 1]);
            for _ in 0..POLICIES_PER_MDP {
                let pi = random_policy(&mut rng, mdp.num_states(), mdp.num_actions());
                if total_variance_norm(&mdp, &pi)? > bound {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![CheckResult::all("total_variance_norm <= sqrt(2)*horizon^1.5", &outcomes)])
}

fn nondecreasing(snapshots: &[Snapshot]) -> bool {
    snapshots
        .windows(2)
        .all(|w| w[0].v.iter().zip(&w[1].v).all(|(a, b)| a <= b))
}

fn monotone_iterates(trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    for kind in [SolverKind::SolveMdp1, SolverKind::SolveMdp2] {
        let mut solver = SolverConfig::new(kind, 1.0);
        solver.record_snapshots = true;
        let outcomes = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mdp = small_random_mdp(seed, t, 4, 0.9)?;
                let report = run_solver(&mdp, &solver, &EstimatorConfig::default(), seed.wrapping_add(t as u64))?;
                Ok(report.diagnostics.is_monotone() && nondecreasing(&report.snapshots))
            })
            .collect::<Result<Vec<_>>>()?;
        checks.push(CheckResult::all(format!("{kind:?} snapshots nondecreasing"), &outcomes));
    }
    Ok(checks)
}

/// Fraction of runs that must meet the guarantee at `δ = 0.1`.
pub const SANDWICH_FRACTION: f64 = 0.9;

fn sandwich(trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    for kind in [SolverKind::SolveMdp1, SolverKind::SolveMdp2] {
        for (na, eps) in [(2, 0.3), (8, 1.0)] {
            let spec = HardInstanceSpec::new(0.9, na, eps, vec![na - 1]);
            let mdp = multi_action::<f64>(&spec)?;
            let truth = GroundTruth::of(&mdp)?;
            let solver = SolverConfig::new(kind, eps);
            let outcomes = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let report = run_solver(&mdp, &solver, &EstimatorConfig::default(), seed.wrapping_add(t as u64))?;
                    meets_guarantee(&mdp, &truth, &report, eps)
                })
                .collect::<Result<Vec<_>>>()?;
            let required = (SANDWICH_FRACTION * trials as f64).ceil() as usize;
            checks.push(CheckResult::count(format!("{kind:?} sandwich A={na} eps={eps}"), &outcomes, required));
        }
    }
    Ok(checks)
}

pub const ORACLE_BITS: u32 = 10;

fn oracle_normalization(trials: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut normalized = Vec::with_capacity(trials);
    let mut preimages = Vec::with_capacity(trials);
    for t in 0..trials {
        let dyadic = DyadicMdp::quantize(&small_random_mdp(seed, t, 6, 0.9)?, ORACLE_BITS)?;
        let oracle = build_quantum_oracle(&dyadic)?;
        let mut squares_match = oracle.is_normalized();
        let mut counts_match = true;
        for s in 0..dyadic.num_states {
            for a in 0..dyadic.num_actions {
                let row = dyadic.row(s, a);
                let map = build_reversible_map(row)?;
                for (next, amp) in oracle.amplitudes(s, a).iter().enumerate() {
                    squares_match &= amp.squared() == row.probability(next);
                    let images = (0..row.size()).filter(|&x| map.apply(x).ok() == Some(next)).count() as u64;
                    counts_match &= images == row.counts[next] && map.preimage_count(next) == row.counts[next];
                }
            }
        }
        normalized.push(squares_match);
        preimages.push(counts_match);
    }
    Ok(vec![
        CheckResult::all("amplitude^2 == p(s'|s,a) exactly", &normalized),
        CheckResult::all("preimage count == 2^m * p(s'|s,a)", &preimages),
    ])
}

/// Arm gap with `c_α = 3` at `γ = 0.9`, `ε = 1`.
pub const C_ALPHA_3_GAP: f64 = 0.8718;

fn gap_checks() -> Result<Vec<CheckResult>> {
    let mut grid = Vec::new();
    for gamma in [0.9, 0.95, 0.99] {
        for eps in [0.1, 0.5, 1.0] {
            if eps < effective_horizon(gamma) / DEFAULT_C_ALPHA {
                grid.push(gap_check::<f64>(gamma, eps, DEFAULT_C_ALPHA)? >= 2.0 * eps);
            }
        }
    }
    let loose = gap_check::<f64>(0.9, 1.0, 3.0)?;
    Ok(vec![
        CheckResult::all("gap >= 2 eps with c_alpha = 9", &grid),
        CheckResult::all(
            "gap with c_alpha = 3 is 0.8718 < 2 eps",
            &[(loose - C_ALPHA_3_GAP).abs() <= 1e-3 && loose < 2.0],
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for name in SUITES {
            assert!(Suite::parse(name).is_ok());
        }
        assert!(Suite::parse("everything").is_err());
    }

    #[test]
    fn small_suites_pass() {
        for (suite, trials) in [
            (Suite::TotalVariance, 50),
            (Suite::MonotoneIterates, 5),
            (Suite::OracleNormalization, 10),
            (Suite::GapChecks, 1),
        ] {
            for check in run_suite(suite, Some(trials), 3).unwrap() {
                assert!(check.ok(), "{check}");
                assert_eq!(check.total, if suite == Suite::GapChecks { check.total } else { trials });
            }
        }
    }

    #[test]
    fn gap_grid_has_every_admissible_point() {
        let checks = gap_checks().unwrap();
        assert_eq!(checks[0].total, 9);
    }

    #[test]
    fn check_display() {
        let check = CheckResult::count("x", &[true, false, true], 2);
        assert!(check.ok());
        assert_eq!(check.to_string(), "PASS x: 2/3 (need 2)");
    }
}
