use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

use super::{Mdp, Policy, QVec, ValueVec};

fn dot<T: Scalar>(p: &[T], u: &[T]) -> T {
    p.iter().zip(u).map(|(&x, &y)| x * y).sum()
}

/// `(Pu)[s,a] = p_{s,a}ᵀ u`.
pub fn apply_p<T: Scalar>(mdp: &Mdp<T>, u: &ValueVec<T>) -> Result<QVec<T>> {
    check_len("value vector", mdp.num_states(), u.len())?;
    let mut out = QVec::zeros(mdp.num_states(), mdp.num_actions());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            out.set(s, a, dot(mdp.row(s, a), u.as_slice()));
        }
    }
    Ok(out)
}

/// `σ²(u) = Pu² − (Pu)²`, the per-pair variance of `u[s']`.
///
/// Cancellation noise down to `-VARIANCE_CANCELLATION_TOL` is clamped to zero;
/// anything more negative is reported as an error.
pub fn sigma_sq<T: Scalar>(mdp: &Mdp<T>, u: &ValueVec<T>) -> Result<QVec<T>> {
    check_len("value vector", mdp.num_states(), u.len())?;
    let squared: Vec<T> = u.0.iter().map(|&x| x * x).collect();
    let mut out = QVec::zeros(mdp.num_states(), mdp.num_actions());
    for s in 0..mdp.num_states() {
        for a in 0..mdp.num_actions() {
            let row = mdp.row(s, a);
            let mean = dot(row, u.as_slice());
            let var = dot(row, &squared) - mean * mean;
            if var.as_f64() < -T::VARIANCE_CANCELLATION_TOL * (T::one() + mean * mean).as_f64() {
                return Err(Error::param(
                    "u",
                    format!("variance at ({s},{a}) is {var}, below cancellation tolerance"),
                ));
            }
            out.set(s, a, var.max(T::zero()));
        }
    }
    Ok(out)
}

/// Bellman optimality operator `T(v)[s] = max_a { r[s,a] + γ (Pv)[s,a] }`.
pub fn bellman<T: Scalar>(mdp: &Mdp<T>, v: &ValueVec<T>) -> Result<ValueVec<T>> {
    check_len("value vector", mdp.num_states(), v.len())?;
    let gamma = mdp.discount();
    let out = (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions())
                .map(|a| mdp.reward(s, a) + gamma * dot(mdp.row(s, a), v.as_slice()))
                .fold(T::neg_infinity(), T::max)
        })
        .collect();
    Ok(ValueVec(out))
}

/// Policy operator `T^π(u)[s] = r[s,π(s)] + γ p_{s,π(s)}ᵀ u`.
pub fn value_operator_pi<T: Scalar>(mdp: &Mdp<T>, pi: &Policy, u: &ValueVec<T>) -> Result<ValueVec<T>> {
    pi.validate_for(mdp)?;
    check_len("value vector", mdp.num_states(), u.len())?;
    let gamma = mdp.discount();
    let out = (0..mdp.num_states())
        .map(|s| {
            let a = pi[s];
            mdp.reward(s, a) + gamma * dot(mdp.row(s, a), u.as_slice())
        })
        .collect();
    Ok(ValueVec(out))
}

/// Row-wise max and argmax of `q`; ties go to the lowest action index.
pub fn greedy<T: Scalar>(q: &QVec<T>) -> Result<(ValueVec<T>, Policy)> {
    if q.num_actions == 0 || q.values.len() % q.num_actions != 0 {
        return Err(Error::DimensionMismatch {
            what: "q vector",
            expected: q.num_actions.max(1),
            got: q.values.len(),
        });
    }
    let num_states = q.num_states();
    let mut values = Vec::with_capacity(num_states);
    let mut actions = Vec::with_capacity(num_states);
    for s in 0..num_states {
        let row = q.row(s);
        let (best, value) = row
            .iter()
            .enumerate()
            .fold((0, row[0]), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) });
        values.push(value);
        actions.push(best);
    }
    Ok((ValueVec(values), Policy(actions)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard_instances::two_state;

    fn uniform2() -> Mdp<f64> {
        Mdp::from_nested(
            &[vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]],
            &[vec![0.0], vec![0.0]],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn apply_p_examples() {
        let q = apply_p(&uniform2(), &ValueVec(vec![0.0, 2.0])).unwrap();
        assert_eq!(q.values, vec![1.0, 1.0]);

        let point = Mdp::from_nested(
            &[vec![vec![1.0, 0.0]; 2], vec![vec![1.0, 0.0]; 2]],
            &[vec![0.0; 2], vec![0.0; 2]],
            0.5,
        )
        .unwrap();
        let q = apply_p(&point, &ValueVec(vec![3.5, -1.0])).unwrap();
        assert!(q.values.iter().all(|&x| x == 3.5));

        let mdp = Mdp::<f64>::from_nested(
            &[vec![vec![0.3, 0.7]], vec![vec![1.0, 0.0]]],
            &[vec![0.0], vec![0.0]],
            0.5,
        )
        .unwrap();
        let q = apply_p(&mdp, &ValueVec(vec![1.0, 3.0])).unwrap();
        // 0.3·1 + 0.7·3
        assert!((q.get(0, 0) - 2.4).abs() < 1e-15);
    }

    #[test]
    fn apply_p_dimension_mismatch() {
        assert!(matches!(
            apply_p(&uniform2(), &ValueVec(vec![1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sigma_sq_examples() {
        let var = sigma_sq(&uniform2(), &ValueVec(vec![0.0, 2.0])).unwrap();
        assert!((var.get(0, 0) - 1.0).abs() < 1e-15);

        let det = two_state::<f64>(0.9, 0.0).unwrap();
        let var = sigma_sq(&det, &ValueVec(vec![4.0, 1.0])).unwrap();
        assert!(var.values.iter().all(|&x| x == 0.0));

        let var = sigma_sq(&uniform2(), &ValueVec(vec![0.3, 0.3])).unwrap();
        assert!(var.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bellman_examples() {
        let mdp = two_state::<f64>(0.9, 0.5).unwrap();
        assert_eq!(bellman(&mdp, &ValueVec(vec![0.0, 0.0])).unwrap().0, vec![1.0, 0.0]);
        let out = bellman(&mdp, &ValueVec(vec![1.0, 0.0])).unwrap();
        // 1 + 0.9·(0.5·1 + 0.5·0)
        assert!((out[0] - 1.45).abs() < 1e-15);

        let myopic = Mdp::from_nested(
            &[vec![vec![0.2, 0.8], vec![1.0, 0.0]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
            &[vec![0.1, 0.7], vec![0.4, 0.2]],
            0.0,
        )
        .unwrap();
        let out = bellman(&myopic, &ValueVec(vec![5.0, 9.0])).unwrap();
        assert_eq!(out.0, vec![0.7, 0.4]);
    }

    #[test]
    fn policy_operator_examples() {
        let mdp = Mdp::from_nested(
            &[vec![vec![0.2, 0.8], vec![1.0, 0.0]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
            &[vec![0.1, 0.7], vec![0.4, 0.2]],
            0.8,
        )
        .unwrap();
        let pi = Policy(vec![1, 0]);
        let out = value_operator_pi(&mdp, &pi, &ValueVec::zeros(2)).unwrap();
        assert_eq!(out.0, vec![0.7, 0.4]);

        let myopic = mdp.with_discount(0.0).unwrap();
        let out = value_operator_pi(&myopic, &pi, &ValueVec(vec![3.0, 8.0])).unwrap();
        assert_eq!(out.0, vec![0.7, 0.4]);
    }

    #[test]
    fn greedy_examples() {
        let q = QVec::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
        let (v, pi) = greedy(&q).unwrap();
        assert_eq!(v.0, vec![2.0, 3.0]);
        assert_eq!(pi.0, vec![1, 0]);

        let q = QVec::from_rows(&[vec![0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(greedy(&q).unwrap().1 .0, vec![0]);
    }

    #[test]
    fn greedy_rejects_ragged() {
        let q = QVec {
            num_actions: 2,
            values: vec![1.0, 2.0, 3.0],
        };
        assert!(greedy(&q).is_err());
    }
}
