//! Exact tabular-MDP mathematics.
//!
//! Everything in this module is deterministic and generic over [`Scalar`]:
//! the transition/reward tables, the operators `P`, `σ²`, the Bellman and
//! policy operators, greedy extraction, and the exact solvers that serve as
//! ground truth for the stochastic layers.

mod exact;
mod io;
mod linalg;
mod ops;
mod random;

pub use exact::{exact_value_iteration, policy_value_exact, total_variance_norm, ExactSolution};
pub use io::MdpFile;
pub use linalg::solve_dense;
pub use ops::{apply_p, bellman, greedy, sigma_sq, value_operator_pi};
pub use random::{random_mdp, random_policy};

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// `Γ = 1/(1-γ)`, snapped to the nearest integer when it is one up to rounding.
pub fn effective_horizon(discount: f64) -> f64 {
    let horizon = 1.0 / (1.0 - discount);
    let nearest = horizon.round();
    if (horizon - nearest).abs() <= 1e-9 * horizon.max(1.0) {
        nearest
    } else {
        horizon
    }
}

/// A tabular discounted MDP `(S, A, p, r, γ)`.
///
/// Transitions are stored flat in `[s][a][s']` order, rewards in `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<T> {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<T>,
    rewards: Vec<T>,
    discount: T,
}

impl<T: Scalar> Mdp<T> {
    /// Builds an MDP from flat tables, validating every invariant.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<T>,
        rewards: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::invalid_mdp("S", "must be positive"));
        }
        if num_actions == 0 {
            return Err(Error::invalid_mdp("A", "must be positive"));
        }
        check_len("transition table", num_states * num_actions * num_states, transitions.len())?;
        check_len("reward table", num_states * num_actions, rewards.len())?;
        let mdp = Mdp {
            num_states,
            num_actions,
            transitions,
            rewards,
            discount,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds an MDP from nested `p[s][a][s']` and `r[s][a]` tables.
    pub fn from_nested(p: &[Vec<Vec<T>>], r: &[Vec<T>], discount: T) -> Result<Self> {
        let num_states = p.len();
        let num_actions = p.first().map_or(0, Vec::len);
        let mut transitions = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, rows) in p.iter().enumerate() {
            if rows.len() != num_actions {
                return Err(Error::invalid_mdp(
                    format!("p[{s}]"),
                    format!("has {} actions, expected {num_actions}", rows.len()),
                ));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != num_states {
                    return Err(Error::invalid_mdp(
                        format!("p[{s}][{a}]"),
                        format!("has {} entries, expected {num_states}", row.len()),
                    ));
                }
                transitions.extend_from_slice(row);
            }
        }
        if r.len() != num_states {
            return Err(Error::invalid_mdp(
                "r",
                format!("has {} rows, expected {num_states}", r.len()),
            ));
        }
        let mut rewards = Vec::with_capacity(num_states * num_actions);
        for (s, row) in r.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::invalid_mdp(
                    format!("r[{s}]"),
                    format!("has {} entries, expected {num_actions}", row.len()),
                ));
            }
            rewards.extend_from_slice(row);
        }
        Mdp::new(num_states, num_actions, transitions, rewards, discount)
    }

    fn validate(&self) -> Result<()> {
        let gamma = self.discount.as_f64();
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid_mdp("gamma", format!("{gamma} not in [0, 1)")));
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let r = self.reward(s, a).as_f64();
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::invalid_mdp(format!("r[{s}][{a}]"), format!("{r} not in [0, 1]")));
                }
                let row = self.row(s, a);
                for (next, &p) in row.iter().enumerate() {
                    let p = p.as_f64();
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::invalid_mdp(
                            format!("p[{s}][{a}][{next}]"),
                            format!("{p} not in [0, 1]"),
                        ));
                    }
                }
                let total: f64 = row.iter().map(|p| p.as_f64()).sum();
                if (total - 1.0).abs() > T::NORMALIZATION_TOL {
                    return Err(Error::invalid_mdp(
                        format!("p[{s}][{a}]"),
                        format!("row sums to {total}, expected 1"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn effective_horizon(&self) -> T {
        T::lit(effective_horizon(self.discount.as_f64()))
    }

    /// `p_{s,a}`: the successor distribution of `(s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[T] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> T {
        self.row(s, a)[next]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.rewards[s * self.num_actions + a]
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[T] {
        &self.transitions
    }

    /// Same MDP with a different discount factor.
    pub fn with_discount(&self, discount: T) -> Result<Self> {
        let mut mdp = self.clone();
        mdp.discount = discount;
        mdp.validate()?;
        Ok(mdp)
    }

    /// Converts every table to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<Mdp<U>> {
        let conv = |x: &T| U::lit(x.as_f64());
        Mdp::new(
            self.num_states,
            self.num_actions,
            self.transitions.iter().map(conv).collect(),
            self.rewards.iter().map(conv).collect(),
            U::lit(self.discount.as_f64()),
        )
    }
}

/// Deterministic stationary policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn constant(num_states: usize, action: usize) -> Self {
        Policy(vec![action; num_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate_for<T: Scalar>(&self, mdp: &Mdp<T>) -> Result<()> {
        check_len("policy", mdp.num_states(), self.0.len())?;
        for &a in &self.0 {
            if a >= mdp.num_actions() {
                return Err(Error::IndexOutOfRange {
                    what: "policy action",
                    index: a,
                    bound: mdp.num_actions(),
                });
            }
        }
        Ok(())
    }
}

impl Index<usize> for Policy {
    type Output = usize;
    fn index(&self, s: usize) -> &usize {
        &self.0[s]
    }
}

/// A vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVec<T>(pub Vec<T>);

impl<T: Scalar> ValueVec<T> {
    pub fn zeros(num_states: usize) -> Self {
        ValueVec(vec![T::zero(); num_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// `max_s |self[s] - other[s]|`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
    }
}

impl<T> Index<usize> for ValueVec<T> {
    type Output = T;
    fn index(&self, s: usize) -> &T {
        &self.0[s]
    }
}

impl<T> IndexMut<usize> for ValueVec<T> {
    fn index_mut(&mut self, s: usize) -> &mut T {
        &mut self.0[s]
    }
}

/// A vector over state–action pairs, row-major in `(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVec<T> {
    pub num_actions: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> QVec<T> {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        QVec {
            num_actions,
            values: vec![T::zero(); num_states * num_actions],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * num_actions);
        for row in rows {
            check_len("q row", num_actions, row.len())?;
            values.extend_from_slice(row);
        }
        Ok(QVec {
            num_actions,
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        if self.num_actions == 0 {
            0
        } else {
            self.values.len() / self.num_actions
        }
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: T) {
        self.values[s * self.num_actions + a] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_row_with_path() {
        let err = Mdp::<f64>::from_nested(
            &[vec![vec![0.5, 0.4]], vec![vec![0.0, 1.0]]],
            &[vec![0.0], vec![0.0]],
            0.9,
        )
        .unwrap_err();
        assert!(err.to_string().contains("p[0][0]"), "{err}");
    }

    #[test]
    fn rejects_reward_out_of_range() {
        let err = Mdp::<f64>::from_nested(&[vec![vec![1.0]]], &[vec![1.5]], 0.5).unwrap_err();
        assert!(err.to_string().contains("r[0][0]"), "{err}");
    }

    #[test]
    fn rejects_discount_of_one() {
        assert!(Mdp::<f64>::from_nested(&[vec![vec![1.0]]], &[vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn horizon_snaps_rounding_noise() {
        assert_eq!(effective_horizon(0.9), 10.0);
        assert_eq!(effective_horizon(0.99), 100.0);
        assert!((effective_horizon(0.3) - 1.0 / 0.7).abs() < 1e-15);
    }

    #[test]
    fn policy_validation() {
        let mdp = Mdp::<f64>::from_nested(&[vec![vec![1.0], vec![1.0]]], &[vec![0.0, 1.0]], 0.5).unwrap();
        assert!(Policy(vec![1]).validate_for(&mdp).is_ok());
        assert!(Policy(vec![2]).validate_for(&mdp).is_err());
        assert!(Policy(vec![0, 0]).validate_for(&mdp).is_err());
    }

    #[test]
    fn cast_roundtrip_to_f32() {
        let mdp = Mdp::<f64>::from_nested(
            &[vec![vec![0.25, 0.75]], vec![vec![1.0, 0.0]]],
            &[vec![0.5], vec![1.0]],
            0.9,
        )
        .unwrap();
        let small: Mdp<f32> = mdp.cast().unwrap();
        assert_eq!(small.prob(0, 0, 1), 0.75f32);
    }
}
