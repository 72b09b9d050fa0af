use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::QueryLedger;

/// Largest supported number of phase qubits.
pub const MAX_PHASE_BITS: u32 = 24;

const PHASE_LABEL: &str = "amplitude-estimation";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEstimationConfig {
    pub phase_bits: u32,
    /// The squared amplitude `a` being estimated.
    pub target_amplitude: f64,
}

impl AmplitudeEstimationConfig {
    pub fn new(phase_bits: u32, target_amplitude: f64) -> Result<Self> {
        let cfg = AmplitudeEstimationConfig {
            phase_bits,
            target_amplitude,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase_bits == 0 || self.phase_bits > MAX_PHASE_BITS {
            return Err(Error::param(
                "phase_bits",
                format!("{} not in 1..={MAX_PHASE_BITS}", self.phase_bits),
            ));
        }
        if !(0.0..=1.0).contains(&self.target_amplitude) {
            return Err(Error::param(
                "target_amplitude",
                format!("{} not in [0, 1]", self.target_amplitude),
            ));
        }
        Ok(())
    }

    pub fn resolution(&self) -> u64 {
        1u64 << self.phase_bits
    }

    /// Grover-operator applications per run, `2^t − 1`.
    pub fn queries_per_run(&self) -> u64 {
        self.resolution() - 1
    }

    /// `θ_a ∈ [0, 1/2]` with `a = sin²(π θ_a)`.
    fn phase(&self) -> f64 {
        self.target_amplitude.sqrt().min(1.0).asin() / PI
    }

    /// `2π√(a(1−a))/M + π²/M²`, the radius met with probability at least `8/π²`.
    pub fn single_run_radius(&self) -> f64 {
        let a = self.target_amplitude;
        let m = self.resolution() as f64;
        2.0 * PI * (a * (1.0 - a)).sqrt() / m + PI * PI / (m * m)
    }

    /// Radius valid for every `a`: `π/M + π²/M²`.
    pub fn worst_case_radius(phase_bits: u32) -> f64 {
        let m = (1u64 << phase_bits) as f64;
        PI / m + PI * PI / (m * m)
    }
}

/// Fejér kernel `sin²(Mπd)/(M² sin²(πd))`, equal to 1 at integer `d`.
fn fejer(m: f64, d: f64) -> f64 {
    let d = d - d.round();
    let denom = (PI * d).sin();
    if denom.abs() < 1e-15 {
        return 1.0;
    }
    let num = (m * PI * d).sin();
    (num * num) / (m * m * denom * denom)
}

/// `Pr[y]` of the canonical amplitude-estimation measurement.
pub fn outcome_probability(cfg: &AmplitudeEstimationConfig, y: u64) -> f64 {
    let m = cfg.resolution() as f64;
    let theta = cfg.phase();
    let x = y as f64 / m;
    0.5 * (fejer(m, theta - x) + fejer(m, 1.0 - theta - x))
}

/// The full outcome distribution over `y ∈ {0, …, 2^t − 1}`.
pub fn outcome_distribution(cfg: &AmplitudeEstimationConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok((0..cfg.resolution()).map(|y| outcome_probability(cfg, y)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSample {
    pub outcome: u64,
    /// `sin²(π y / 2^t)`.
    pub estimate: f64,
    pub queries: u64,
}

fn sample_outcome<R: Rng + ?Sized>(cfg: &AmplitudeEstimationConfig, rng: &mut R) -> u64 {
    let size = cfg.resolution();
    let m = size as f64;
    let theta = cfg.phase();
    // The distribution is an equal mixture of two Fejér peaks; pick one, then
    // invert its CDF walking outward from the peak.
    let centre = if rng.random::<bool>() { theta } else { 1.0 - theta };
    let base = (centre * m).round() as i64;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for step in 0..size as i64 {
        let offset = if step % 2 == 0 { -(step / 2) } else { step / 2 + 1 };
        let y = (base + offset).rem_euclid(size as i64) as u64;
        acc += fejer(m, centre - y as f64 / m);
        if u < acc {
            return y;
        }
    }
    base.rem_euclid(size as i64) as u64
}

/// One canonical amplitude-estimation run; charges `2^t − 1` quantum calls.
pub fn amplitude_estimation_sample<R: Rng + ?Sized>(
    cfg: &AmplitudeEstimationConfig,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<AmplitudeSample> {
    cfg.validate()?;
    let outcome = sample_outcome(cfg, rng);
    let s = (PI * outcome as f64 / cfg.resolution() as f64).sin();
    ledger.charge_quantum(PHASE_LABEL, cfg.queries_per_run());
    Ok(AmplitudeSample {
        outcome,
        estimate: s * s,
        queries: cfg.queries_per_run(),
    })
}

/// `18·⌈log₂(1/δ)⌉` repetitions for median amplification.
pub fn powering_repeats(delta: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    Ok(18 * ((1.0 / delta).log2().ceil() as u64).max(1))
}

/// Median of an odd or even sample; the lower middle element for even sizes.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values[(values.len() - 1) / 2]
}

/// Median estimate of `repeats` independent runs.
pub fn median_of_runs<R: Rng + ?Sized>(
    cfg: &AmplitudeEstimationConfig,
    repeats: u64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::param("repeats", "must be positive"));
    }
    let mut estimates = (0..repeats)
        .map(|_| amplitude_estimation_sample(cfg, rng, ledger).map(|s| s.estimate))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&mut estimates))
}
