//! Source/sink lower-bound instances with closed-form optimal values.
//!
//! Every gadget has a source `s` (reward 1 for every action) and an absorbing
//! zero-reward sink `t`. From the source, action `a` returns to `s` with
//! probability `p_a` and falls into `t` otherwise, so the action is worth
//! `1/(1 − γ p_a)`. Arms are either small (`p_0 = 1 − 1/Γ`) or large
//! (`p_0 + α`, `α = c_α·ε/Γ²`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{effective_horizon, Mdp, MdpFile};
use crate::scalar::Scalar;

pub const DEFAULT_C_ALPHA: f64 = 9.0;

/// Index of the source state within a gadget (the sink is `SOURCE + 1`).
pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

fn default_c_alpha() -> f64 {
    DEFAULT_C_ALPHA
}

fn default_copies() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    pub gamma: f64,
    pub num_actions: usize,
    pub eps: f64,
    #[serde(default)]
    pub large_arms: Vec<usize>,
    #[serde(default = "default_c_alpha")]
    pub c_alpha: f64,
    #[serde(default = "default_copies")]
    pub copies: usize,
    /// Per-copy large arms; when non-empty it overrides `large_arms` and must
    /// have one entry per copy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub copy_large_arms: Vec<Vec<usize>>,
    /// Reject instances whose arm gap is below `2ε`.
    #[serde(default = "default_true")]
    pub enforce_gap: bool,
}

impl HardInstanceSpec {
    pub fn new(gamma: f64, num_actions: usize, eps: f64, large_arms: Vec<usize>) -> Self {
        HardInstanceSpec {
            gamma,
            num_actions,
            eps,
            large_arms,
            c_alpha: DEFAULT_C_ALPHA,
            copies: 1,
            copy_large_arms: Vec::new(),
            enforce_gap: true,
        }
    }

    pub fn horizon(&self) -> f64 {
        effective_horizon(self.gamma)
    }

    /// `p_0 = 1 − 1/Γ`.
    pub fn p_small(&self) -> f64 {
        1.0 - 1.0 / self.horizon()
    }

    /// `α = c_α·ε/Γ²`.
    pub fn alpha(&self) -> f64 {
        alpha(self.gamma, self.eps, self.c_alpha)
    }

    pub fn p_large(&self) -> f64 {
        self.p_small() + self.alpha()
    }

    pub fn large_arms_of_copy(&self, copy: usize) -> &[usize] {
        if self.copy_large_arms.is_empty() {
            &self.large_arms
        } else {
            &self.copy_large_arms[copy]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.9..1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("{} not in [0.9, 1)", self.gamma)));
        }
        if self.num_actions == 0 {
            return Err(Error::param("num_actions", "must be at least 1"));
        }
        if self.copies == 0 {
            return Err(Error::param("copies", "must be at least 1"));
        }
        if self.c_alpha < 0.0 {
            return Err(Error::param("c_alpha", "must be non-negative"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        let horizon = self.horizon();
        if self.c_alpha * self.eps >= horizon {
            return Err(Error::param(
                "eps",
                format!(
                    "{} must be below Γ/c_α = {} so that p_0 + α < 1",
                    self.eps,
                    horizon / self.c_alpha
                ),
            ));
        }
        if !self.copy_large_arms.is_empty() && self.copy_large_arms.len() != self.copies {
            return Err(Error::param(
                "copy_large_arms",
                format!("has {} entries for {} copies", self.copy_large_arms.len(), self.copies),
            ));
        }
        for copy in 0..self.copies {
            if let Some(&bad) = self.large_arms_of_copy(copy).iter().find(|&&a| a >= self.num_actions) {
                return Err(Error::IndexOutOfRange {
                    what: "large arm",
                    index: bad,
                    bound: self.num_actions,
                });
            }
        }
        if self.enforce_gap {
            let gap = gap_check::<f64>(self.gamma, self.eps, self.c_alpha)?;
            if gap < 2.0 * self.eps {
                return Err(Error::param(
                    "c_alpha",
                    format!(
                        "arm gap {gap} is below 2ε = {}; raise c_alpha or set enforce_gap = false",
                        2.0 * self.eps
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Closed-form optimal value of every state (source, sink per copy).
    pub fn optimal_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.copies);
        for copy in 0..self.copies {
            let p = if self.large_arms_of_copy(copy).is_empty() {
                self.p_small()
            } else {
                self.p_large()
            };
            out.push(arm_value::<f64>(self.gamma, p));
            out.push(0.0);
        }
        out
    }

    /// Instance in the standard MDP JSON layout with a provenance block.
    pub fn export(&self) -> Result<MdpFile> {
        let mut file = MdpFile::from_mdp(&copies::<f64>(self)?);
        file.provenance = Some(serde_json::json!({
            "generator": "hard_instance",
            "gamma": self.gamma,
            "eps": self.eps,
            "c_alpha": self.c_alpha,
            "copies": self.copies,
            "large_arms": (0..self.copies)
                .map(|c| self.large_arms_of_copy(c).to_vec())
                .collect::<Vec<_>>(),
        }));
        Ok(file)
    }
}

pub fn alpha(gamma: f64, eps: f64, c_alpha: f64) -> f64 {
    let horizon = effective_horizon(gamma);
    c_alpha * eps / (horizon * horizon)
}

/// `1/(1 − γp)`, the value of a source arm with return probability `p`.
pub fn arm_value<T: Scalar>(gamma: f64, p: f64) -> T {
    let (g, p) = (T::lit(gamma), T::lit(p));
    T::one() / (T::one() - g * p)
}

/// Two-state, one-action gadget with return probability `p`.
pub fn two_state<T: Scalar>(gamma: f64, p: f64) -> Result<Mdp<T>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} not in [0, 1]")));
    }
    gadget_blocks(gamma, &[vec![p]])
}

/// Two-state gadget with `A` source arms.
pub fn multi_action<T: Scalar>(spec: &HardInstanceSpec) -> Result<Mdp<T>> {
    let mut single = spec.clone();
    single.copies = 1;
    if !spec.copy_large_arms.is_empty() {
        single.copy_large_arms = vec![spec.copy_large_arms[0].clone()];
    }
    copies(&single)
}

/// Block-diagonal MDP of `spec.copies` independent gadgets, `S = 2·copies`.
pub fn copies<T: Scalar>(spec: &HardInstanceSpec) -> Result<Mdp<T>> {
    spec.validate()?;
    let (small, large) = (spec.p_small(), spec.p_large());
    let arms: Vec<Vec<f64>> = (0..spec.copies)
        .map(|copy| {
            let big = spec.large_arms_of_copy(copy);
            (0..spec.num_actions)
                .map(|a| if big.contains(&a) { large } else { small })
                .collect()
        })
        .collect();
    gadget_blocks(gamma_checked(spec.gamma)?, &arms)
}

fn gamma_checked(gamma: f64) -> Result<f64> {
    if (0.0..1.0).contains(&gamma) {
        Ok(gamma)
    } else {
        Err(Error::param("gamma", format!("{gamma} not in [0, 1)")))
    }
}

fn gadget_blocks<T: Scalar>(gamma: f64, arms: &[Vec<f64>]) -> Result<Mdp<T>> {
    let gamma = gamma_checked(gamma)?;
    let num_actions = arms[0].len();
    let num_states = 2 * arms.len();
    let mut transitions = vec![T::zero(); num_states * num_actions * num_states];
    let mut rewards = vec![T::zero(); num_states * num_actions];
    let at = |s: usize, a: usize, next: usize| (s * num_actions + a) * num_states + next;
    for (copy, probs) in arms.iter().enumerate() {
        let source = 2 * copy + SOURCE;
        let sink = 2 * copy + SINK;
        for (a, &p) in probs.iter().enumerate() {
            transitions[at(source, a, source)] = T::lit(p);
            transitions[at(source, a, sink)] = T::lit(1.0 - p);
            transitions[at(sink, a, sink)] = T::one();
            rewards[source * num_actions + a] = T::one();
        }
    }
    Mdp::new(num_states, num_actions, transitions, rewards, T::lit(gamma))
}

/// Exact value gap between a large and a small arm:
/// `1/(1 − γ(p_0 + α)) − 1/(1 − γ p_0)`.
pub fn gap_check<T: Scalar>(gamma: f64, eps: f64, c_alpha: f64) -> Result<T> {
    let horizon = effective_horizon(gamma_checked(gamma)?);
    if horizon < 10.0 - 1e-9 {
        return Err(Error::param("gamma", format!("{gamma} gives Γ = {horizon} < 10")));
    }
    let p0 = 1.0 - 1.0 / horizon;
    let a = alpha(gamma, eps, c_alpha);
    if !(a >= 0.0) || p0 + a >= 1.0 {
        return Err(Error::param(
            "eps",
            format!("p_0 + α = {} must stay below 1", p0 + a),
        ));
    }
    Ok(arm_value::<T>(gamma, p0 + a) - arm_value::<T>(gamma, p0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::exact_value_iteration;

    #[test]
    fn two_state_values() {
        for (p, expected) in [(0.0, 1.0), (1.0, 10.0), (0.5, 1.0 / 0.55)] {
            let mdp = two_state::<f64>(0.9, p).unwrap();
            let sol = exact_value_iteration(&mdp, 1e-11).unwrap();
            assert!((sol.v[SOURCE] - expected).abs() < 1e-9, "p={p}");
            assert!((arm_value::<f64>(0.9, p) - expected).abs() < 1e-12);
            assert!(sol.v[SINK].abs() < 1e-12);
        }
        assert!(two_state::<f64>(0.9, 1.2).is_err());
    }

    #[test]
    fn multi_action_arm_values() {
        let spec = HardInstanceSpec::new(0.9, 2, 0.5, vec![1]);
        assert!((spec.p_small() - 0.9).abs() < 1e-15);
        assert!((spec.alpha() - 0.045).abs() < 1e-15);
        let small = arm_value::<f64>(0.9, spec.p_small());
        let large = arm_value::<f64>(0.9, spec.p_large());
        assert!((small - 5.2632).abs() < 1e-4);
        assert!((large - 6.6890).abs() < 1e-4);

        let mdp = multi_action::<f64>(&spec).unwrap();
        let sol = exact_value_iteration(&mdp, 1e-10).unwrap();
        assert_eq!(sol.pi[SOURCE], 1);
        assert!((sol.v[SOURCE] - large).abs() < 1e-8);
        // one pull of the small arm, then the large arm forever
        let deviate = 1.0 + 0.9 * spec.p_small() * large;
        assert!((sol.q.get(SOURCE, 0) - deviate).abs() < 1e-8);
        assert!((sol.q.get(SOURCE, 1) - large).abs() < 1e-8);
        assert!(deviate > small);
    }

    #[test]
    fn no_large_arm_means_all_arms_tie() {
        let spec = HardInstanceSpec::new(0.9, 3, 0.5, vec![]);
        let mdp = multi_action::<f64>(&spec).unwrap();
        let sol = exact_value_iteration(&mdp, 1e-10).unwrap();
        let row = sol.q.row(SOURCE);
        assert!(row.iter().all(|&x| (x - row[0]).abs() < 1e-9));
    }

    #[test]
    fn copies_are_independent_blocks() {
        let mut spec = HardInstanceSpec::new(0.9, 3, 0.5, vec![]);
        spec.copies = 3;
        spec.copy_large_arms = vec![vec![2], vec![], vec![0, 1]];
        let mdp = copies::<f64>(&spec).unwrap();
        assert_eq!(mdp.num_states(), 6);
        let sol = exact_value_iteration(&mdp, 1e-10).unwrap();
        let closed = spec.optimal_values();
        for s in 0..6 {
            assert!((sol.v[s] - closed[s]).abs() < 1e-8);
        }
        let one = HardInstanceSpec::new(0.9, 3, 0.5, vec![2]);
        let single = exact_value_iteration(&multi_action::<f64>(&one).unwrap(), 1e-10).unwrap();
        assert!((single.v[SOURCE] - sol.v[0]).abs() < 1e-9);
    }

    #[test]
    fn single_copy_matches_multi_action() {
        let spec = HardInstanceSpec::new(0.95, 4, 0.3, vec![1, 3]);
        assert_eq!(copies::<f64>(&spec).unwrap(), multi_action::<f64>(&spec).unwrap());
    }

    #[test]
    fn gap_values() {
        let gap = gap_check::<f64>(0.9, 0.5, 9.0).unwrap();
        assert!((gap - 1.4258).abs() < 1e-4);
        assert_eq!(gap_check::<f64>(0.9, 0.5, 0.0).unwrap(), 0.0);
        let loose = gap_check::<f64>(0.9, 1.0, 3.0).unwrap();
        assert!((loose - 0.8718).abs() < 1e-3);
        assert!(loose < 2.0);
        let smaller = gap_check::<f64>(0.9, 0.5, 8.0).unwrap();
        assert!(smaller < gap);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(HardInstanceSpec::new(0.8, 2, 0.5, vec![]).validate().is_err());
        assert!(HardInstanceSpec::new(0.9, 2, 1.2, vec![]).validate().is_err());
        assert!(HardInstanceSpec::new(0.9, 2, 0.5, vec![2]).validate().is_err());
        let mut loose = HardInstanceSpec::new(0.9, 2, 1.0, vec![0]);
        loose.c_alpha = 3.0;
        assert!(loose.validate().is_err());
        loose.enforce_gap = false;
        assert!(loose.validate().is_ok());
    }

    #[test]
    fn export_carries_provenance() {
        let spec = HardInstanceSpec::new(0.9, 2, 0.5, vec![1]);
        let file = spec.export().unwrap();
        let prov = file.provenance.as_ref().unwrap();
        assert_eq!(prov["c_alpha"], 9.0);
        assert_eq!(prov["large_arms"][0][0], 1);
        let back: Mdp<f64> = file.to_mdp().unwrap();
        assert_eq!(back, multi_action::<f64>(&spec).unwrap());
    }
}
