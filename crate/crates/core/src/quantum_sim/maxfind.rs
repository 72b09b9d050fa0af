use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default maximum-finding constant `c_max`.
pub const DEFAULT_C_MAX: f64 = 4.0;

/// Growth factor of the randomized Grover iteration schedule.
const LAMBDA: f64 = 6.0 / 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxFindingTrace {
    /// Every accepted threshold `(index, value)`, in order.
    pub threshold_history: Vec<(usize, f64)>,
    pub grover_queries_charged: u64,
    pub budget: u64,
}

impl MaxFindingTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Query budget `⌊c_max·√n·log₂(1/δ)⌋`, at least 1.
pub fn qargmax_budget(n: usize, delta: f64, c_max: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::param("values", "must be nonempty"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} not in (0, 1)")));
    }
    if !(c_max > 0.0) {
        return Err(Error::param("c_max", "must be positive"));
    }
    Ok(((c_max * (n as f64).sqrt() * (1.0 / delta).log2()).floor() as u64).max(1))
}

/// `i` beats `j` when its value is larger, or equal with a lower index.
fn beats(values: &[f64], i: usize, j: usize) -> bool {
    values[i] > values[j] || (values[i] == values[j] && i < j)
}

/// Dürr–Høyer maximum finding.
///
/// Starting from a uniformly random index, repeatedly Grover-searches for an
/// entry beating the current threshold with the randomized schedule of Boyer
/// et al., drawing each search outcome from its exact success probability
/// `sin²((2j+1)θ)`, `sin²θ = k/n`. Stops when the query budget runs out.
pub fn qargmax_simulate<R: Rng + ?Sized>(
    values: &[f64],
    delta: f64,
    c_max: f64,
    rng: &mut R,
) -> Result<(usize, MaxFindingTrace)> {
    let budget = qargmax_budget(values.len(), delta, c_max)?;
    let n = values.len();
    let mut threshold = rng.random_range(0..n);
    let mut spent = 1u64;
    let mut history = vec![(threshold, values[threshold])];

    let sqrt_n = (n as f64).sqrt();
    'outer: while spent < budget {
        let better: Vec<usize> = (0..n).filter(|&i| beats(values, i, threshold)).collect();
        let theta = (better.len() as f64 / n as f64).sqrt().asin();
        let mut m = 1.0f64;
        loop {
            let j = rng.random_range(0..m.ceil() as u64);
            let cost = j + 1;
            if spent + cost > budget {
                break 'outer;
            }
            spent += cost;
            let success = ((2 * j + 1) as f64 * theta).sin().powi(2);
            if !better.is_empty() && rng.random::<f64>() < success {
                threshold = better[rng.random_range(0..better.len())];
                history.push((threshold, values[threshold]));
                continue 'outer;
            }
            m = (LAMBDA * m).min(sqrt_n);
        }
    }
    Ok((
        threshold,
        MaxFindingTrace {
            threshold_history: history,
            grover_queries_charged: spent,
            budget,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn single_entry() {
        let mut rng = stream_rng(0, 0);
        let (idx, trace) = qargmax_simulate(&[3.0], 0.1, DEFAULT_C_MAX, &mut rng).unwrap();
        assert_eq!(idx, 0);
        assert!(trace.grover_queries_charged as f64 <= DEFAULT_C_MAX * 10f64.log2());
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        for seed in 0..50 {
            let mut rng = stream_rng(seed, 0);
            let (idx, _) = qargmax_simulate(&[2.0; 9], 0.01, DEFAULT_C_MAX, &mut rng).unwrap();
            assert_eq!(idx, 0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = stream_rng(0, 0);
        assert!(qargmax_simulate(&[], 0.1, DEFAULT_C_MAX, &mut rng).is_err());
        assert!(qargmax_simulate(&[1.0], 1.0, DEFAULT_C_MAX, &mut rng).is_err());
    }

    #[test]
    fn success_frequency_on_ramp() {
        let values: Vec<f64> = (0..16).map(f64::from).collect();
        let cap = DEFAULT_C_MAX * 4.0 * 10f64.log2();
        let mut correct = 0;
        for seed in 0..2000 {
            let mut rng = stream_rng(seed, 7);
            let (idx, trace) = qargmax_simulate(&values, 0.1, DEFAULT_C_MAX, &mut rng).unwrap();
            assert!(trace.grover_queries_charged as f64 <= cap);
            correct += usize::from(idx == 15);
        }
        assert!(correct as f64 / 2000.0 >= 0.9, "{correct}");
    }

    #[test]
    fn trace_exports() {
        let mut rng = stream_rng(3, 0);
        let (_, trace) = qargmax_simulate(&[0.1, 0.5, 0.2], 0.1, DEFAULT_C_MAX, &mut rng).unwrap();
        let json = trace.to_json().unwrap();
        assert!(json.contains("threshold_history"));
    }

    proptest! {
        #[test]
        fn thresholds_increase_and_budget_holds(
            values in prop::collection::vec(0.0f64..10.0, 1..40),
            delta in 0.01f64..0.9,
            seed in any::<u64>(),
        ) {
            let mut rng = stream_rng(seed, 0);
            let (idx, trace) = qargmax_simulate(&values, delta, DEFAULT_C_MAX, &mut rng).unwrap();
            let budget = qargmax_budget(values.len(), delta, DEFAULT_C_MAX).unwrap();
            prop_assert!(trace.grover_queries_charged <= budget);
            for w in trace.threshold_history.windows(2) {
                prop_assert!(beats(&values, w[1].0, w[0].0));
            }
            prop_assert_eq!(trace.threshold_history.last().unwrap().0, idx);
        }
    }
}
