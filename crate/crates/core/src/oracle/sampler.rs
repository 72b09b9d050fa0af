use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{check_len, Error, Result};
use crate::mdp::Mdp;
use crate::rng::{derive_seed, stream_rng, tagged_rng, StreamRng};

use super::QueryLedger;

const DEFAULT_PHASE: &str = "unphased";

/// Classical generative model: draws `s' ~ p(·|s,a)` for any chosen `(s, a)`
/// and records every draw in its ledger.
///
/// Call `i` of [`sample`](Self::sample) uses stream `i` of the oracle's seed,
/// so equal seeds and equal call sequences give equal sample sequences.
#[derive(Debug, Clone)]
pub struct SampleOracle<'a> {
    mdp: &'a Mdp<f64>,
    seed: u64,
    calls: u64,
    ledger: QueryLedger,
    phase: String,
}

impl<'a> SampleOracle<'a> {
    pub fn new(mdp: &'a Mdp<f64>, seed: u64) -> Self {
        SampleOracle {
            mdp,
            seed,
            calls: 0,
            ledger: QueryLedger::new(),
            phase: DEFAULT_PHASE.to_owned(),
        }
    }

    pub fn mdp(&self) -> &'a Mdp<f64> {
        self.mdp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> QueryLedger {
        self.ledger
    }

    pub fn phase(&self) -> &str {
        &self.phase
    }

    /// Label that subsequent charges are attributed to.
    pub fn set_phase(&mut self, label: impl Into<String>) {
        self.phase = label.into();
    }

    /// Independent oracle over the same MDP, seeded from `(seed, tags)`,
    /// with an empty ledger. Fold its ledger back with [`absorb`](Self::absorb).
    pub fn child(&self, tags: &[u64]) -> SampleOracle<'a> {
        SampleOracle {
            mdp: self.mdp,
            seed: derive_seed(self.seed, tags),
            calls: 0,
            ledger: QueryLedger::new(),
            phase: self.phase.clone(),
        }
    }

    pub fn absorb(&mut self, child: SampleOracle<'_>) {
        self.ledger.merge(&child.ledger);
    }

    /// Random stream for the tag path `tags`; independent of the call counter.
    pub fn rng_at(&self, tags: &[u64]) -> StreamRng {
        tagged_rng(self.seed, tags)
    }

    fn check_pair(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.mdp.num_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: s,
                bound: self.mdp.num_states(),
            });
        }
        if a >= self.mdp.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                bound: self.mdp.num_actions(),
            });
        }
        Ok(())
    }

    /// One draw of `s' ~ p(·|s,a)`; charges one classical sample.
    pub fn sample(&mut self, s: usize, a: usize) -> Result<usize> {
        self.check_pair(s, a)?;
        let mut rng = stream_rng(self.seed, self.calls);
        self.calls += 1;
        self.ledger.charge_classical(&self.phase, 1);
        let row = self.mdp.row(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (next, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(next);
            }
        }
        // u landed in the rounding slack above the last cumulative sum
        Ok(row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1))
    }

    /// Successor histogram of `n` i.i.d. draws from `p(·|s,a)`; charges `n`
    /// classical samples.
    pub fn sample_histogram<R: Rng + ?Sized>(
        &mut self,
        s: usize,
        a: usize,
        n: u64,
        rng: &mut R,
    ) -> Result<Vec<u64>> {
        self.check_pair(s, a)?;
        self.ledger.charge_classical(&self.phase, n);
        let row = self.mdp.row(s, a);
        let mut counts = vec![0u64; row.len()];
        let mut remaining = n;
        let mut mass = 1.0f64;
        let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (next, &p) in row.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if next == last {
                counts[next] = remaining;
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let q = (p / mass).clamp(0.0, 1.0);
            let k = Binomial::new(remaining, q)
                .map_err(|e| Error::param("p", e.to_string()))?
                .sample(rng);
            counts[next] = k;
            remaining -= k;
            mass -= p;
        }
        Ok(counts)
    }

    /// `Σ_{s'} p(s'|s,a) v[s']`, the quantity every estimator targets.
    pub fn exact_mean(&self, s: usize, a: usize, v: &[f64]) -> Result<f64> {
        self.check_pair(s, a)?;
        check_len("value map", self.mdp.num_states(), v.len())?;
        Ok(self.mdp.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum())
    }

    /// `Var[v[s'] | s' ~ p(·|s,a)]`, clamped at zero.
    pub fn exact_variance(&self, s: usize, a: usize, v: &[f64]) -> Result<f64> {
        let mean = self.exact_mean(s, a, v)?;
        let second: f64 = self.mdp.row(s, a).iter().zip(v).map(|(p, x)| p * x * x).sum();
        Ok((second - mean * mean).max(0.0))
    }

    pub fn charge_quantum(&mut self, n: u64) {
        self.ledger.charge_quantum(&self.phase, n);
    }

    pub fn charge_classical(&mut self, n: u64) {
        self.ledger.charge_classical(&self.phase, n);
    }
}
