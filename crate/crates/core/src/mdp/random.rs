use rand::Rng;

use crate::error::Result;

use super::{Mdp, Policy};

/// Random MDP with `num_states` states and `num_actions` actions.
///
/// Each transition row puts uniform weights on a random nonempty subset of
/// successors, normalized so the row sums to 1 exactly up to rounding.
/// Rewards are uniform on `[0, 1]`.
pub fn random_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
    discount: f64,
) -> Result<Mdp<f64>> {
    let mut transitions = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let keep = rng.random_range(0.2..=1.0);
        let mut row: Vec<f64> = (0..num_states)
            .map(|_| if rng.random::<f64>() < keep { rng.random::<f64>() } else { 0.0 })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            row[rng.random_range(0..num_states)] = 1.0;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|w| *w /= total);
        let (big, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, &w)| if w > best.1 { (i, w) } else { best });
        let rest: f64 = row.iter().enumerate().filter(|&(i, _)| i != big).map(|(_, w)| w).sum();
        row[big] = 1.0 - rest;
        transitions.extend(row);
    }
    let rewards = (0..num_states * num_actions).map(|_| rng.random::<f64>()).collect();
    Mdp::new(num_states, num_actions, transitions, rewards, discount)
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, num_states: usize, num_actions: usize) -> Policy {
    Policy((0..num_states).map(|_| rng.random_range(0..num_actions)).collect())
}
