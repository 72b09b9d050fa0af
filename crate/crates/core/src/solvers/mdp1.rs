use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{qest1, qest2, EstimatorConfig, MeanEstimate, MeanQuery};
use crate::mdp::{greedy, Policy, QVec};
use crate::oracle::SampleOracle;

use super::{
    check_delta, clamp_into, clamp_q, horizon_of, iteration_count, monotone_update, oracle_context,
    phase_label, q_rows, SolveOptions, SolveReport, Trace,
};

const TAG_SECOND_MOMENT: u64 = 8;
const TAG_FIRST_MOMENT: u64 = 80;
const TAG_ANCHOR: u64 = 9;
const TAG_INCREMENT: u64 = 13;

/// Parameters of `solve_mdp1`, with the derived epoch count `K`, epoch
/// length `L` and per-estimate failure probability `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams1 {
    pub eps: f64,
    pub delta: f64,
    pub b: f64,
    pub c: f64,
    pub horizon: f64,
    pub epochs: u64,
    pub epoch_length: u64,
    pub f: f64,
}

impl SolveParams1 {
    /// `K = ⌈log₂(Γ/ε)⌉`, `L = ⌈Γ·⌈ln(4Γ/ε)⌉ + 1⌉`, `f = δ/(4KLSA)`, with
    /// `b = 1` and `c = 0.01`.
    pub fn derive(eps: f64, delta: f64, horizon: f64, num_states: usize, num_actions: usize) -> Result<Self> {
        Self::with_constants(eps, delta, 1.0, 0.01, horizon, num_states, num_actions)
    }

    pub fn with_constants(
        eps: f64,
        delta: f64,
        b: f64,
        c: f64,
        horizon: f64,
        num_states: usize,
        num_actions: usize,
    ) -> Result<Self> {
        check_delta(delta)?;
        if !(eps > 0.0 && eps <= horizon.sqrt()) {
            return Err(Error::param("eps", format!("{eps} not in (0, √Γ] for Γ = {horizon}")));
        }
        if !(b > 0.0) || !(c > 0.0) {
            return Err(Error::param("b", "b and c must be positive"));
        }
        let epochs = ((horizon / eps).log2().ceil() as u64).max(1);
        let epoch_length = iteration_count(horizon, eps);
        let f = delta / (4.0 * (epochs * epoch_length) as f64 * (num_states * num_actions) as f64);
        Ok(SolveParams1 {
            eps,
            delta,
            b,
            c,
            horizon,
            epochs,
            epoch_length,
            f,
        })
    }

    pub fn for_oracle(eps: f64, delta: f64, oracle: &SampleOracle<'_>) -> Result<Self> {
        let (ns, na) = oracle_context(oracle);
        Self::derive(eps, delta, horizon_of(oracle.mdp()), ns, na)
    }
}

fn tally(estimate: &MeanEstimate, trace: &mut Trace) {
    if estimate.failed {
        trace.diagnostics.estimator_failures += 1;
    }
    if estimate.promise_violation {
        trace.diagnostics.variance_promise_violations += 1;
    }
}

/// Variance-reduced monotone value iteration with quantum mean estimation.
///
/// Each epoch `k` estimates `σ²(v_{k,0})` and `P·v_{k,0}` once; its `L`
/// inner iterations estimate only the increment `P(v_{k,l} − v_{k,0})`.
/// Every estimate is shifted down by its error radius, so the iterates stay
/// below the value of their own policy whenever all estimates succeed.
pub fn solve_mdp1(
    oracle: &mut SampleOracle<'_>,
    params: &SolveParams1,
    cfg: &EstimatorConfig,
    options: &SolveOptions,
) -> Result<SolveReport> {
    cfg.validate()?;
    let mdp = oracle.mdp();
    let (ns, na) = oracle_context(oracle);
    let gamma = mdp.discount();
    let horizon = params.horizon;
    let f = params.f;
    let (b, c, eps) = (params.b, params.c, params.eps);

    let mut trace = Trace::new(options.record_snapshots);
    let mut v = vec![0.0; ns];
    let mut pi = Policy::constant(ns, 0);
    let mut q = QVec::<f64>::zeros(ns, na);

    for k in 1..=params.epochs {
        let eps_k = horizon / 2f64.powi(k as i32);
        let anchor = clamp_into(&v, horizon, &mut trace.diagnostics.clipped_entries);
        let anchor_sq: Vec<f64> = anchor.iter().map(|x| x * x).collect();
        let sigma_sq = crate::mdp::sigma_sq(mdp, &crate::mdp::ValueVec(anchor.clone()))?;

        let mut x = vec![0.0; ns * na];
        let mut slack = 0.0f64;
        oracle.set_phase(phase_label(&[&"epoch", &k, &"variance"]));
        let mut y = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let context = || format!("epoch {k}, variance estimate, (s, a) = ({s}, {a})");
                let mut rng = oracle.rng_at(&[TAG_SECOND_MOMENT, k, 0, s as u64, a as u64]);
                let second = qest1(oracle, MeanQuery::new(s, a, &anchor_sq), horizon * horizon, b, f, cfg, &mut rng)
                    .map_err(|e| e.context(context()))?;
                let mut rng = oracle.rng_at(&[TAG_FIRST_MOMENT, k, 0, s as u64, a as u64]);
                let first = qest1(oracle, MeanQuery::new(s, a, &anchor), horizon, (1.0 - gamma) * b, f, cfg, &mut rng)
                    .map_err(|e| e.context(context()))?;
                tally(&second, &mut trace);
                tally(&first, &mut trace);
                let estimate = (second.value - first.value * first.value).max(0.0);
                y[s * na + a] = estimate;
                slack = slack.max((estimate - sigma_sq.get(s, a)).abs());
            }
        }
        trace.diagnostics.variance_slack.push(slack);

        oracle.set_phase(phase_label(&[&"epoch", &k, &"anchor"]));
        for s in 0..ns {
            for a in 0..na {
                let sigma = (y[s * na + a] + b).sqrt();
                let err = c * (1.0 - gamma).powf(1.5) * eps * sigma;
                let mut rng = oracle.rng_at(&[TAG_ANCHOR, k, 0, s as u64, a as u64]);
                let est = qest2(oracle, MeanQuery::new(s, a, &anchor), sigma, err, f, cfg, &mut rng)
                    .map_err(|e| e.context(format!("epoch {k}, anchor estimate, (s, a) = ({s}, {a})")))?;
                tally(&est, &mut trace);
                x[s * na + a] = est.value - err;
            }
        }

        oracle.set_phase(phase_label(&[&"epoch", &k, &"increment"]));
        let radius = c * (1.0 - gamma) * eps_k;
        for l in 1..=params.epoch_length {
            let prev = v.clone();
            let (greedy_v, greedy_pi) = greedy(&q)?;
            monotone_update(&mut v, &mut pi, &greedy_v.0, &greedy_pi);
            if v.iter().zip(&greedy_v.0).any(|(new, g)| new < g) {
                trace.diagnostics.greedy_dominance_violations += 1;
            }
            trace.push(&prev, &v, &pi);

            let increment: Vec<f64> = v.iter().zip(&anchor).map(|(now, start)| now - start).collect();
            let increment = clamp_into(&increment, 2.0 * eps_k, &mut trace.diagnostics.clipped_entries);
            let pv = crate::mdp::apply_p(mdp, &crate::mdp::ValueVec(v.clone()))?;
            for s in 0..ns {
                for a in 0..na {
                    let mut rng = oracle.rng_at(&[TAG_INCREMENT, k, l, s as u64, a as u64]);
                    let est = qest1(oracle, MeanQuery::new(s, a, &increment), 2.0 * eps_k, radius, f, cfg, &mut rng)
                        .map_err(|e| e.context(format!("epoch {k}, increment estimate, l = {l}, (s, a) = ({s}, {a})")))?;
                    tally(&est, &mut trace);
                    let delta_sa = est.value - radius;
                    let combined = x[s * na + a] + delta_sa;
                    if combined > pv.get(s, a) + 1e-12 * horizon.max(1.0) {
                        trace.diagnostics.one_sided_violations += 1;
                    }
                    let raw = (mdp.reward(s, a) + gamma * combined).max(0.0);
                    q.set(s, a, clamp_q(raw, horizon, &mut trace.diagnostics.clipped_entries));
                }
            }
        }
        trace.diagnostics.epoch_values.push(v.clone());
    }

    Ok(SolveReport {
        solver: "solve_mdp1".to_owned(),
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
