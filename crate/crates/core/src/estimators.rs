//! Mean estimation of `(Pv)[s,a] = E[v(s') | s' ~ p(·|s,a)]`.
//!
//! The quantum estimators `qest1` (range-bounded) and `qest2`
//! (variance-bounded) charge their theorem query counts to the oracle's
//! ledger. The contract mock returns an error drawn to match the accuracy
//! contract exactly; the statevector backend runs amplitude estimation on the
//! range-normalized mean. The classical Hoeffding and Bernstein estimators
//! draw real samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{QueryLedger, SampleOracle};
use crate::quantum_sim::{
    amplitude_estimation_sample, median, AmplitudeEstimationConfig, MAX_PHASE_BITS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    ContractMock,
    Statevector,
    ClassicalHoeffding,
    ClassicalBernstein,
}

/// How a failed contract-mock estimate is displaced from the true mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// `U(−T·ε, T·ε)`.
    UniformNoise,
    /// `±T·ε` with a random sign.
    AdversarialEdge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub c1: f64,
    pub c2: f64,
    pub mock_failure_mode: FailureMode,
    pub adversarial_scale: f64,
    /// Backend used by `qest1`; `qest2` always runs the contract mock.
    pub backend: Backend,
    /// Fixed phase-register size for the statevector backend; chosen from
    /// the error target when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_bits: Option<u32>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            c1: 1.0,
            c2: 1.0,
            mock_failure_mode: FailureMode::AdversarialEdge,
            adversarial_scale: 10.0,
            backend: Backend::ContractMock,
            phase_bits: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::param("c1", "must be positive"));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::param("c2", "must be positive"));
        }
        if !(self.adversarial_scale >= 1.0) {
            return Err(Error::param("adversarial_scale", "must be at least 1"));
        }
        if !matches!(self.backend, Backend::ContractMock | Backend::Statevector) {
            return Err(Error::param("backend", "quantum estimators use contract_mock or statevector"));
        }
        if let Some(t) = self.phase_bits {
            if t == 0 || t > MAX_PHASE_BITS {
                return Err(Error::param("phase_bits", format!("{t} not in 1..={MAX_PHASE_BITS}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub error_radius: f64,
    pub confidence: f64,
    pub queries_charged: u64,
    pub backend: Backend,
    /// The estimate missed the true mean by at least `error_radius`.
    pub failed: bool,
    /// The variance bound handed to `qest2` was below the true variance.
    pub promise_violation: bool,
}

/// The mean being estimated: `v` under `p(·|s,a)`.
#[derive(Debug, Clone, Copy)]
pub struct MeanQuery<'v> {
    pub s: usize,
    pub a: usize,
    pub v: &'v [f64],
}

impl<'v> MeanQuery<'v> {
    pub fn new(s: usize, a: usize, v: &'v [f64]) -> Self {
        MeanQuery { s, a, v }
    }
}

fn check_accuracy(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("{eps} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    Ok(())
}

fn check_range(v: &[f64], u: f64) -> Result<()> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::param("u", format!("{u} must be non-negative")));
    }
    let slack = 1e-9 * u.max(1.0);
    if let Some((i, x)) = v.iter().enumerate().find(|(_, &x)| !(x >= -slack && x <= u + slack)) {
        return Err(Error::PromiseViolation(format!("v[{i}] = {x} outside [0, {u}]")));
    }
    Ok(())
}

/// Median-amplification repetitions `2·⌈log₂(3/δ)⌉ + 1`.
pub fn amplification(delta: f64) -> u64 {
    2 * (3.0 / delta).log2().ceil() as u64 + 1
}

/// `⌈C1·(u/ε + √(u/ε))⌉·(2⌈log₂(3/δ)⌉ + 1)`.
pub fn qest1_charge(u: f64, eps: f64, delta: f64, c1: f64) -> u64 {
    qest1_base_charge(u, eps, c1) * amplification(delta)
}

pub fn qest1_base_charge(u: f64, eps: f64, c1: f64) -> u64 {
    let ratio = u / eps;
    ((c1 * (ratio + ratio.sqrt())).ceil() as u64).max(1)
}

/// `⌈C2·(σ/ε)·log₂²(max(σ/ε, 2))⌉·(2⌈log₂(3/δ)⌉ + 1)`.
pub fn qest2_charge(sigma: f64, eps: f64, delta: f64, c2: f64) -> u64 {
    qest2_base_charge(sigma, eps, c2) * amplification(delta)
}

pub fn qest2_base_charge(sigma: f64, eps: f64, c2: f64) -> u64 {
    let ratio = sigma / eps;
    let log = ratio.max(2.0).log2();
    ((c2 * ratio * log * log).ceil() as u64).max(1)
}

/// `⌈u²·ln(2/δ)/(2ε²)⌉`, at least 1.
pub fn hoeffding_samples(u: f64, eps: f64, delta: f64) -> u64 {
    ((u * u * (2.0 / delta).ln() / (2.0 * eps * eps)).ceil() as u64).max(1)
}

/// `⌈2·(σ²/ε² + u/(3ε))·ln(3/δ)⌉`, at least 1.
pub fn bernstein_samples(u: f64, sigma: f64, eps: f64, delta: f64) -> u64 {
    let n = 2.0 * (sigma * sigma / (eps * eps) + u / (3.0 * eps)) * (3.0 / delta).ln();
    (n.ceil() as u64).max(1)
}

/// Draws a contract-mock estimate of `mu`: within `eps` with probability
/// `1 − delta`, displaced per `cfg.mock_failure_mode` otherwise.
fn mock_value<R: Rng + ?Sized>(mu: f64, eps: f64, delta: f64, cfg: &EstimatorConfig, rng: &mut R) -> f64 {
    if rng.random::<f64>() >= delta {
        return mu + rng.random_range(-eps..eps);
    }
    let reach = cfg.adversarial_scale * eps;
    let offset = match cfg.mock_failure_mode {
        FailureMode::AdversarialEdge => {
            if rng.random::<bool>() {
                reach
            } else {
                -reach
            }
        }
        FailureMode::UniformNoise => rng.random_range(-reach..reach),
    };
    mu + offset
}

/// Smallest `t` with `u·(π/2^t + π²/4^t) < eps`.
pub fn statevector_phase_bits(u: f64, eps: f64) -> Result<u32> {
    (1..=MAX_PHASE_BITS)
        .find(|&t| u * AmplitudeEstimationConfig::worst_case_radius(t) < eps)
        .ok_or_else(|| {
            Error::param(
                "eps",
                format!("{eps} needs more than {MAX_PHASE_BITS} phase bits at range {u}"),
            )
        })
}

/// Range-bounded quantum mean estimation, promise `0 ≤ v ≤ u`.
pub fn qest1<R: Rng + ?Sized>(
    oracle: &mut SampleOracle<'_>,
    query: MeanQuery<'_>,
    u: f64,
    eps: f64,
    delta: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<MeanEstimate> {
    check_accuracy(eps, delta)?;
    check_range(query.v, u)?;
    let mu = oracle.exact_mean(query.s, query.a, query.v)?;
    let (value, queries) = match cfg.backend {
        Backend::Statevector => {
            let t = match cfg.phase_bits {
                Some(t) => t,
                None => statevector_phase_bits(u, eps)?,
            };
            let a = if u > 0.0 { (mu / u).clamp(0.0, 1.0) } else { 0.0 };
            let ae = AmplitudeEstimationConfig::new(t, a)?;
            let mut scratch = QueryLedger::new();
            let mut runs = (0..amplification(delta))
                .map(|_| amplitude_estimation_sample(&ae, rng, &mut scratch).map(|s| s.estimate * u))
                .collect::<Result<Vec<_>>>()?;
            (median(&mut runs), scratch.quantum_oracle_calls())
        }
        _ => {
            let value = mock_value(mu, eps, delta, cfg, rng);
            (value, qest1_charge(u, eps, delta, cfg.c1))
        }
    };
    oracle.charge_quantum(queries);
    Ok(MeanEstimate {
        value,
        error_radius: eps,
        confidence: 1.0 - delta,
        queries_charged: queries,
        backend: if cfg.backend == Backend::Statevector {
            Backend::Statevector
        } else {
            Backend::ContractMock
        },
        failed: (value - mu).abs() >= eps,
        promise_violation: false,
    })
}

/// Variance-bounded quantum mean estimation, promise `Var ≤ σ²`, with
/// `ε ∈ (0, 4σ)`. Always served by the contract mock.
pub fn qest2<R: Rng + ?Sized>(
    oracle: &mut SampleOracle<'_>,
    query: MeanQuery<'_>,
    sigma: f64,
    eps: f64,
    delta: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<MeanEstimate> {
    check_accuracy(eps, delta)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("{sigma} must be positive")));
    }
    if eps >= 4.0 * sigma {
        return Err(Error::param("eps", format!("{eps} not in (0, 4σ) for σ = {sigma}")));
    }
    let mu = oracle.exact_mean(query.s, query.a, query.v)?;
    let var = oracle.exact_variance(query.s, query.a, query.v)?;
    let promise_violation = var > sigma * sigma * (1.0 + 1e-9) + 1e-12;
    let value = mock_value(mu, eps, delta, cfg, rng);
    let queries = qest2_charge(sigma, eps, delta, cfg.c2);
    oracle.charge_quantum(queries);
    Ok(MeanEstimate {
        value,
        error_radius: eps,
        confidence: 1.0 - delta,
        queries_charged: queries,
        backend: Backend::ContractMock,
        failed: (value - mu).abs() >= eps,
        promise_violation,
    })
}

fn empirical_mean<R: Rng + ?Sized>(
    oracle: &mut SampleOracle<'_>,
    query: MeanQuery<'_>,
    n: u64,
    rng: &mut R,
) -> Result<f64> {
    let counts = oracle.sample_histogram(query.s, query.a, n, rng)?;
    let total: f64 = counts.iter().zip(query.v).map(|(&k, &x)| k as f64 * x).sum();
    Ok(total / n as f64)
}

/// Empirical mean of `⌈u²·ln(2/δ)/(2ε²)⌉` samples.
pub fn classical_hoeffding_mean<R: Rng + ?Sized>(
    oracle: &mut SampleOracle<'_>,
    query: MeanQuery<'_>,
    u: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<MeanEstimate> {
    check_accuracy(eps, delta)?;
    check_range(query.v, u)?;
    let mu = oracle.exact_mean(query.s, query.a, query.v)?;
    let n = hoeffding_samples(u, eps, delta);
    let value = empirical_mean(oracle, query, n, rng)?;
    Ok(MeanEstimate {
        value,
        error_radius: eps,
        confidence: 1.0 - delta,
        queries_charged: n,
        backend: Backend::ClassicalHoeffding,
        failed: (value - mu).abs() >= eps,
        promise_violation: false,
    })
}

/// Empirical mean of `⌈2·(σ²/ε² + u/(3ε))·ln(3/δ)⌉` samples.
pub fn classical_bernstein_mean<R: Rng + ?Sized>(
    oracle: &mut SampleOracle<'_>,
    query: MeanQuery<'_>,
    u: f64,
    sigma: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<MeanEstimate> {
    check_accuracy(eps, delta)?;
    check_range(query.v, u)?;
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be non-negative"));
    }
    let mu = oracle.exact_mean(query.s, query.a, query.v)?;
    let var = oracle.exact_variance(query.s, query.a, query.v)?;
    let n = bernstein_samples(u, sigma, eps, delta);
    let value = empirical_mean(oracle, query, n, rng)?;
    Ok(MeanEstimate {
        value,
        error_radius: eps,
        confidence: 1.0 - delta,
        queries_charged: n,
        backend: Backend::ClassicalBernstein,
        failed: (value - mu).abs() >= eps,
        promise_violation: var > sigma * sigma * (1.0 + 1e-9) + 1e-12,
    })
}
