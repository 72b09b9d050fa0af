use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Solves the dense `n×n` system `m x = rhs` (row-major `m`) by Gaussian
/// elimination with partial pivoting.
pub fn solve_dense<T: Scalar>(mut m: Vec<T>, mut rhs: Vec<T>) -> Result<Vec<T>> {
    let n = rhs.len();
    check_len("matrix", n * n, m.len())?;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .abs()
                    .partial_cmp(&m[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if m[pivot * n + col].abs() <= T::min_positive_value() {
            return Err(Error::Singular { pivot: col });
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let delta = factor * m[col * n + k];
                m[row * n + k] = m[row * n + k] - delta;
            }
            rhs[row] = rhs[row] - factor * rhs[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let tail: T = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row * n + row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        // [[0, 2], [3, 1]] x = [4, 5]  →  x = [1, 2]
        let x = solve_dense::<f64>(vec![0.0, 2.0, 3.0, 1.0], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        assert!(matches!(
            solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]),
            Err(Error::Singular { .. })
        ));
    }
}
