use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{classical_hoeffding_mean, qest1, EstimatorConfig, MeanQuery};
use crate::mdp::{greedy, QVec};
use crate::oracle::SampleOracle;

use super::{
    check_delta, clamp_into, horizon_of, oracle_context, phase_label, q_encoding_cost, q_rows,
    qargmax, SolveOptions, SolveReport, Trace,
};

const TAG_MEAN: u64 = 2;
const TAG_ARGMAX: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Hoeffding sample means.
    Classical,
    /// `qest1` means, exact maximum.
    QuantumMean,
    /// `qest1` means inside quantum maximum finding.
    QuantumMeanAndMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub eps: f64,
    pub delta: f64,
    pub mode: BaselineMode,
    pub horizon: f64,
    pub iterations: u64,
    /// Failure probability of each estimate, `δ/(iterations·S·A)`.
    pub f: f64,
}

impl BaselineParams {
    /// `⌈Γ·ln(4Γ/ε)⌉ + 1` iterations.
    pub fn derive(
        eps: f64,
        delta: f64,
        mode: BaselineMode,
        horizon: f64,
        num_states: usize,
        num_actions: usize,
    ) -> Result<Self> {
        check_delta(delta)?;
        if !(eps > 0.0 && eps <= horizon) {
            return Err(Error::param("eps", format!("{eps} not in (0, Γ] for Γ = {horizon}")));
        }
        let iterations = (horizon * (4.0 * horizon / eps).ln()).ceil() as u64 + 1;
        let f = delta / (iterations as f64 * (num_states * num_actions) as f64);
        Ok(BaselineParams {
            eps,
            delta,
            mode,
            horizon,
            iterations,
            f,
        })
    }

    pub fn for_oracle(eps: f64, delta: f64, mode: BaselineMode, oracle: &SampleOracle<'_>) -> Result<Self> {
        let (ns, na) = oracle_context(oracle);
        Self::derive(eps, delta, mode, horizon_of(oracle.mdp()), ns, na)
    }
}

/// Sampled value iteration `v_i = T̂(v_{i−1})` with every `(Pv)[s,a]`
/// estimated to error `(1−γ)·ε/4`. No one-sided shift and no monotone
/// update, so only `‖v̂ − v*‖ ≤ ε` is expected, not policy optimality.
pub fn standard_sampled_vi(
    oracle: &mut SampleOracle<'_>,
    params: &BaselineParams,
    cfg: &EstimatorConfig,
    options: &SolveOptions,
) -> Result<SolveReport> {
    cfg.validate()?;
    let mdp = oracle.mdp();
    let (ns, na) = oracle_context(oracle);
    let gamma = mdp.discount();
    let horizon = params.horizon;
    let radius = (1.0 - gamma) * params.eps / 4.0;
    let f = params.f;

    let mut trace = Trace::new(options.record_snapshots);
    let mut v = vec![0.0; ns];
    let mut q = QVec::<f64>::zeros(ns, na);
    let mut pi = crate::mdp::Policy::constant(ns, 0);

    for i in 1..=params.iterations {
        oracle.set_phase(phase_label(&[&"iteration", &i]));
        let target = clamp_into(&v, horizon, &mut trace.diagnostics.clipped_entries);
        let mut scratch = oracle.child(&[]);
        for s in 0..ns {
            for a in 0..na {
                let mut rng = oracle.rng_at(&[TAG_MEAN, i, s as u64, a as u64]);
                let query = MeanQuery::new(s, a, &target);
                let est = match params.mode {
                    BaselineMode::Classical => classical_hoeffding_mean(oracle, query, horizon, radius, f, &mut rng),
                    BaselineMode::QuantumMean => qest1(oracle, query, horizon, radius, f, cfg, &mut rng),
                    BaselineMode::QuantumMeanAndMax => qest1(&mut scratch, query, horizon, radius, f, cfg, &mut rng),
                }
                .map_err(|e| e.context(format!("iteration {i}, (s, a) = ({s}, {a})")))?;
                if est.failed {
                    trace.diagnostics.estimator_failures += 1;
                }
                q.set(s, a, mdp.reward(s, a) + gamma * est.value);
            }
        }
        let prev = v.clone();
        if params.mode == BaselineMode::QuantumMeanAndMax {
            let probe_cost = q_encoding_cost(horizon, radius, f, cfg);
            for s in 0..ns {
                let mut rng = oracle.rng_at(&[TAG_ARGMAX, i, s as u64]);
                let outcome = qargmax(q.row(s), f, options, &mut rng)?;
                oracle.charge_quantum(outcome.probes * probe_cost);
                if outcome.failed {
                    trace.diagnostics.qargmax_failures += 1;
                }
                v[s] = q.get(s, outcome.index);
                pi.0[s] = outcome.index;
            }
        } else {
            let (greedy_v, greedy_pi) = greedy(&q)?;
            v = greedy_v.0;
            pi = greedy_pi;
        }
        trace.push(&prev, &v, &pi);
    }

    Ok(SolveReport {
        solver: "standard_sampled_vi".to_owned(),
        v_hat: v,
        pi_hat: pi,
        q_hat: Some(q_rows(&q.values, na)),
        ledger: oracle.ledger().clone(),
        params: serde_json::to_value(params)?,
        seed: oracle.seed(),
        diagnostics: trace.diagnostics,
        snapshots: trace.snapshots,
        timestamp: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard_instances::two_state;
    use crate::mdp::{exact_value_iteration, Mdp};

    fn run(mdp: &Mdp<f64>, eps: f64, mode: BaselineMode, seed: u64) -> SolveReport {
        let mut oracle = SampleOracle::new(mdp, seed);
        let params = BaselineParams::for_oracle(eps, 0.1, mode, &oracle).unwrap();
        standard_sampled_vi(&mut oracle, &params, &EstimatorConfig::default(), &SolveOptions::default()).unwrap()
    }

    fn bandit() -> Mdp<f64> {
        Mdp::from_nested(
            &[vec![vec![0.5, 0.5], vec![0.1, 0.9]], vec![vec![0.3, 0.7], vec![1.0, 0.0]]],
            &[vec![0.2, 0.6], vec![0.9, 0.4]],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn no_lookahead() {
        let mdp = bandit();
        for mode in [BaselineMode::Classical, BaselineMode::QuantumMean, BaselineMode::QuantumMeanAndMax] {
            let report = run(&mdp, 0.5, mode, 1);
            assert!((report.v_hat[0] - 0.6).abs() <= 0.5 && (report.v_hat[1] - 0.9).abs() <= 0.5);
        }
    }

    #[test]
    fn classical_samples_quadruple_when_eps_halves() {
        let mdp = bandit();
        let coarse = run(&mdp, 0.5, BaselineMode::Classical, 2).ledger.classical_samples() as f64;
        let fine = run(&mdp, 0.25, BaselineMode::Classical, 2).ledger.classical_samples() as f64;
        assert!((fine / coarse - 4.0).abs() <= 0.2, "{}", fine / coarse);
    }

    #[test]
    fn quantum_calls_double_when_eps_halves() {
        let mdp = bandit();
        let coarse = run(&mdp, 0.5, BaselineMode::QuantumMean, 2).ledger.quantum_oracle_calls() as f64;
        let fine = run(&mdp, 0.25, BaselineMode::QuantumMean, 2).ledger.quantum_oracle_calls() as f64;
        assert!((fine / coarse - 2.0).abs() <= 0.2, "{}", fine / coarse);
    }

    #[test]
    fn converges_on_two_state() {
        let mdp = two_state::<f64>(0.9, 0.5).unwrap();
        let v_star = exact_value_iteration(&mdp, 1e-10).unwrap().v;
        for mode in [BaselineMode::Classical, BaselineMode::QuantumMean, BaselineMode::QuantumMeanAndMax] {
            let report = run(&mdp, 0.5, mode, 3);
            assert!((report.v_hat[0] - v_star[0]).abs() <= 0.5, "{mode:?}");
        }
    }
}
