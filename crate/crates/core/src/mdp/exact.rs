use crate::error::Result;
use crate::scalar::Scalar;

use super::linalg::solve_dense;
use super::ops::{apply_p, bellman, greedy, sigma_sq};
use super::{Mdp, Policy, QVec, ValueVec};

/// Value of `pi`, from the `S×S` system `(I − γ P_π) v = r_π`.
pub fn policy_value_exact<T: Scalar>(mdp: &Mdp<T>, pi: &Policy) -> Result<ValueVec<T>> {
    pi.validate_for(mdp)?;
    let n = mdp.num_states();
    let gamma = mdp.discount();
    let mut m = vec![T::zero(); n * n];
    let mut rhs = Vec::with_capacity(n);
    for s in 0..n {
        let a = pi[s];
        for (next, &p) in mdp.row(s, a).iter().enumerate() {
            m[s * n + next] = -gamma * p;
        }
        m[s * n + s] = m[s * n + s] + T::one();
        rhs.push(mdp.reward(s, a));
    }
    Ok(ValueVec(solve_dense(m, rhs)?))
}

#[derive(Debug, Clone)]
pub struct ExactSolution<T> {
    pub v: ValueVec<T>,
    pub pi: Policy,
    pub q: QVec<T>,
    pub iterations: usize,
}

/// Value iteration from zero until the returned `v` is certified within `tol`
/// of the optimal value function.
///
/// Stops once successive iterates differ by at most `tol·(1−γ)/(2γ)`, which by
/// the contraction bound puts the last iterate within `tol/2` of `v*`, or once
/// the a-priori bound `γ^n·Γ·max r` drops to `tol`, whichever comes first.
pub fn exact_value_iteration<T: Scalar>(mdp: &Mdp<T>, tol: T) -> Result<ExactSolution<T>> {
    if tol <= T::zero() {
        return Err(crate::Error::param("tol", "must be positive"));
    }
    let gamma = mdp.discount();
    let threshold = if gamma == T::zero() {
        T::infinity()
    } else {
        tol * (T::one() - gamma) / (T::lit(2.0) * gamma)
    };
    let r_max = mdp.rewards().iter().fold(T::zero(), |m, &r| m.max(r.abs()));
    let mut a_priori = r_max / (T::one() - gamma);
    let mut v = ValueVec::zeros(mdp.num_states());
    let mut iterations = 0;
    loop {
        let next = bellman(mdp, &v)?;
        iterations += 1;
        a_priori = a_priori * gamma;
        let gap = next.max_abs_diff(&v);
        v = next;
        if gap <= threshold || a_priori <= tol {
            break;
        }
    }
    let pv = apply_p(mdp, &v)?;
    let mut q = pv;
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let value = mdp.reward(s, a) + gamma * q.get(s, a);
            q.set(s, a, value);
        }
    }
    let (_, pi) = greedy(&q)?;
    Ok(ExactSolution {
        v,
        pi,
        q,
        iterations,
    })
}

/// `‖(I − γ P^π)^{-1} σ(v^π)‖_∞`, the total-variance quantity of policy `pi`.
///
/// Bounded by `√2·Γ^{1.5}` for every policy. The bound is sometimes printed
/// as `√2/Γ^{1.5}`; that form is not the one satisfied here.
pub fn total_variance_norm<T: Scalar>(mdp: &Mdp<T>, pi: &Policy) -> Result<T> {
    let v_pi = policy_value_exact(mdp, pi)?;
    let sigma: Vec<T> = sigma_sq(mdp, &v_pi)?.values.into_iter().map(T::sqrt).collect();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let n = ns * na;
    let gamma = mdp.discount();
    let mut m = vec![T::zero(); n * n];
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            for (next, &p) in mdp.row(s, a).iter().enumerate() {
                let col = next * na + pi[next];
                m[row * n + col] = m[row * n + col] - gamma * p;
            }
            m[row * n + row] = m[row * n + row] + T::one();
        }
    }
    let x = solve_dense(m, sigma)?;
    Ok(x.into_iter().fold(T::zero(), |acc, y| acc.max(y.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard_instances::two_state;
    use crate::mdp::value_operator_pi;

    #[test]
    fn single_state_self_loop() {
        let mdp = Mdp::<f64>::from_nested(&[vec![vec![1.0]]], &[vec![1.0]], 0.9).unwrap();
        let v = policy_value_exact(&mdp, &Policy(vec![0])).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-12);
        assert_eq!(total_variance_norm(&mdp, &Policy(vec![0])).unwrap(), 0.0);
    }

    #[test]
    fn zero_reward_gives_zero_values() {
        let mdp = Mdp::<f64>::from_nested(
            &[vec![vec![0.3, 0.7]; 2], vec![vec![0.6, 0.4]; 2]],
            &[vec![0.0; 2], vec![0.0; 2]],
            0.95,
        )
        .unwrap();
        assert_eq!(policy_value_exact(&mdp, &Policy(vec![1, 0])).unwrap().0, vec![0.0, 0.0]);
        let sol = exact_value_iteration(&mdp, 1e-9).unwrap();
        assert_eq!(sol.v.0, vec![0.0, 0.0]);
        assert!(sol.q.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_state_closed_forms() {
        let mdp = two_state::<f64>(0.9, 0.5).unwrap();
        let v = policy_value_exact(&mdp, &Policy(vec![0, 0])).unwrap();
        assert!((v[0] - 1.0 / (1.0 - 0.45)).abs() < 1e-12);
        let fixed = value_operator_pi(&mdp, &Policy(vec![0, 0]), &v).unwrap();
        assert!(fixed.max_abs_diff(&v) < 1e-9);

        let tol = 1e-7;
        let sol = exact_value_iteration(&mdp, tol).unwrap();
        assert!((sol.v[0] - 1.818_181_818_181_818).abs() <= tol);

        let absorbing = two_state::<f64>(0.9, 0.0).unwrap();
        let sol = exact_value_iteration(&absorbing, 1e-9).unwrap();
        assert!((sol.v[0] - 1.0).abs() <= 1e-9 && sol.v[1].abs() <= 1e-9);
    }

    #[test]
    fn iteration_count_within_bound() {
        let mdp = two_state::<f64>(0.99, 1.0).unwrap();
        let tol = 1e-6;
        let sol = exact_value_iteration(&mdp, tol).unwrap();
        let horizon = 100.0f64;
        assert!(sol.iterations as f64 <= (horizon * (horizon / tol).ln()).ceil() + 1.0);
        assert!((sol.v[0] - 100.0).abs() <= tol);
    }

    #[test]
    fn q_star_greedy_matches_v_star() {
        let mdp = Mdp::<f64>::from_nested(
            &[vec![vec![0.2, 0.8], vec![0.9, 0.1]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
            &[vec![0.1, 0.7], vec![0.4, 0.2]],
            0.8,
        )
        .unwrap();
        let tol = 1e-10;
        let sol = exact_value_iteration(&mdp, tol).unwrap();
        let (v, _) = greedy(&sol.q).unwrap();
        assert!(v.max_abs_diff(&sol.v) <= tol);
    }

    #[test]
    fn deterministic_mdp_has_zero_total_variance() {
        let mdp = two_state::<f64>(0.9, 1.0).unwrap();
        assert_eq!(total_variance_norm(&mdp, &Policy(vec![0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let mdp = two_state::<f32>(0.9, 0.5).unwrap();
        let sol = exact_value_iteration(&mdp, 1e-4f32).unwrap();
        assert!((sol.v[0] - 1.818_181_8f32).abs() < 1e-3);
    }

    mod properties {
        use super::*;
        use crate::mdp::{random_mdp, random_policy};
        use crate::rng::stream_rng;
        use proptest::prelude::*;
        use rand::Rng;

        fn instance(seed: u64, max_size: usize, gamma: f64) -> Mdp<f64> {
            let mut rng = stream_rng(seed, 0);
            let ns = rng.random_range(1..=max_size);
            let na = rng.random_range(1..=max_size);
            random_mdp(&mut rng, ns, na, gamma).unwrap()
        }

        fn vector(seed: u64, n: usize, scale: f64) -> ValueVec<f64> {
            let mut rng = stream_rng(seed, 1);
            ValueVec((0..n).map(|_| rng.random_range(-scale..scale)).collect())
        }

        proptest! {
            #[test]
            fn policy_operator_contracts(seed in any::<u64>(), gamma in 0.0f64..0.999) {
                let mdp = instance(seed, 6, gamma);
                let pi = random_policy(&mut stream_rng(seed, 2), mdp.num_states(), mdp.num_actions());
                let u = vector(seed, mdp.num_states(), 10.0);
                let w = vector(seed ^ 1, mdp.num_states(), 10.0);
                let tu = value_operator_pi(&mdp, &pi, &u).unwrap();
                let tw = value_operator_pi(&mdp, &pi, &w).unwrap();
                prop_assert!(tu.max_abs_diff(&tw) <= gamma * u.max_abs_diff(&w) + 1e-12);
            }

            #[test]
            fn policy_operator_is_monotone(seed in any::<u64>(), gamma in 0.0f64..0.999) {
                let mdp = instance(seed, 6, gamma);
                let pi = random_policy(&mut stream_rng(seed, 2), mdp.num_states(), mdp.num_actions());
                let u = vector(seed, mdp.num_states(), 10.0);
                let bump = vector(seed ^ 2, mdp.num_states(), 1.0);
                let w = ValueVec(u.0.iter().zip(&bump.0).map(|(x, d)| x + d.abs()).collect());
                let tu = value_operator_pi(&mdp, &pi, &u).unwrap();
                let tw = value_operator_pi(&mdp, &pi, &w).unwrap();
                prop_assert!(tu.0.iter().zip(&tw.0).all(|(a, b)| a <= b));
            }

            #[test]
            fn policy_value_is_fixed_point(seed in any::<u64>(), gamma in 0.0f64..0.99) {
                let mdp = instance(seed, 6, gamma);
                let pi = random_policy(&mut stream_rng(seed, 2), mdp.num_states(), mdp.num_actions());
                let v = policy_value_exact(&mdp, &pi).unwrap();
                let tv = value_operator_pi(&mdp, &pi, &v).unwrap();
                prop_assert!(tv.max_abs_diff(&v) <= 1e-9);
            }

            #[test]
            fn sigma_sq_is_nonnegative_and_vanishes_on_constants(seed in any::<u64>(), c in -5.0f64..5.0) {
                let mdp = instance(seed, 6, 0.9);
                let u = vector(seed, mdp.num_states(), 10.0);
                prop_assert!(sigma_sq(&mdp, &u).unwrap().values.iter().all(|&x| x >= 0.0));
                let flat = ValueVec(vec![c; mdp.num_states()]);
                prop_assert!(sigma_sq(&mdp, &flat).unwrap().values.iter().all(|&x| x.abs() <= 1e-12));
            }
        }

        #[test]
        fn optimal_value_dominates_every_policy() {
            let tol = 1e-8;
            for seed in 0..500u64 {
                let mdp = instance(seed, 6, [0.5, 0.9, 0.95][seed as usize % 3]);
                let v_star = exact_value_iteration(&mdp, tol).unwrap().v;
                let mut rng = stream_rng(seed, 3);
                for _ in 0..50 {
                    let pi = random_policy(&mut rng, mdp.num_states(), mdp.num_actions());
                    let v = policy_value_exact(&mdp, &pi).unwrap();
                    assert!(v_star.0.iter().zip(&v.0).all(|(a, b)| *a >= b - tol), "seed {seed}");
                }
            }
        }

        #[test]
        fn total_variance_bound() {
            for seed in 0..1000u64 {
                let gamma = [0.9, 0.95, 0.99][seed as usize % 3];
                let mdp = instance(seed, 8, gamma);
                let horizon = 1.0 / (1.0 - gamma);
                let pi = random_policy(&mut stream_rng(seed, 4), mdp.num_states(), mdp.num_actions());
                let norm = total_variance_norm(&mdp, &pi).unwrap();
                assert!(norm <= 2f64.sqrt() * horizon.powf(1.5), "seed {seed}: {norm}");
            }
        }
    }
}
