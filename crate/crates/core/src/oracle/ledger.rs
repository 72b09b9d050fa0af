use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Counts of generative-oracle invocations, split by phase label.
///
/// Every charge lands in exactly one phase, so the phase counters always sum
/// to `classical_samples + quantum_oracle_calls`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    classical_samples: u64,
    quantum_oracle_calls: u64,
    phases: BTreeMap<String, u64>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn classical_samples(&self) -> u64 {
        self.classical_samples
    }

    pub fn quantum_oracle_calls(&self) -> u64 {
        self.quantum_oracle_calls
    }

    pub fn total(&self) -> u64 {
        self.classical_samples + self.quantum_oracle_calls
    }

    pub fn phases(&self) -> &BTreeMap<String, u64> {
        &self.phases
    }

    pub fn phase(&self, label: &str) -> u64 {
        self.phases.get(label).copied().unwrap_or(0)
    }

    fn bump_phase(&mut self, phase: &str, n: u64) {
        if let Some(count) = self.phases.get_mut(phase) {
            *count += n;
        } else {
            self.phases.insert(phase.to_owned(), n);
        }
    }

    pub fn charge_classical(&mut self, phase: &str, n: u64) {
        self.classical_samples += n;
        self.bump_phase(phase, n);
    }

    pub fn charge_quantum(&mut self, phase: &str, n: u64) {
        self.quantum_oracle_calls += n;
        self.bump_phase(phase, n);
    }

    /// Entrywise sum.
    pub fn merge(&mut self, other: &QueryLedger) {
        self.classical_samples += other.classical_samples;
        self.quantum_oracle_calls += other.quantum_oracle_calls;
        for (label, &n) in &other.phases {
            self.bump_phase(label, n);
        }
    }

    pub fn merged(mut self, other: &QueryLedger) -> Self {
        self.merge(other);
        self
    }

    pub fn is_conserved(&self) -> bool {
        self.phases.values().sum::<u64>() == self.total()
    }
}
