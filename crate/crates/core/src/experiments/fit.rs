use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub axis: String,
    /// `(x, median queries)` per sweep point.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(axis: &str, points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::param("points", format!("need at least 3, got {}", points.len())));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::param("points", format!("({x}, {y}) is not positive and finite")));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit {
        axis: axis.to_owned(),
        points: points.to_vec(),
        slope,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x.powf(1.5))).collect();
        let fit = fit_power_law("x", &pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let fit = fit_power_law("x", &[(1.0, 7.0), (2.0, 7.0), (4.0, 7.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn rejects_short_or_nonpositive_input() {
        assert!(fit_power_law("x", &[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_power_law("x", &[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_power_law("x", &[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_exponent_under_noise(beta in -3.0f64..3.0, scale in 0.1f64..1e4, seed in any::<u64>()) {
            let mut rng = stream_rng(seed, 0);
            let pts: Vec<_> = (0..8)
                .map(|i| {
                    let x = 2f64.powi(i);
                    (x, scale * x.powf(beta) * (1.0 + rng.random_range(-0.01..0.01)))
                })
                .collect();
            let fit = fit_power_law("x", &pts).unwrap();
            prop_assert!((fit.slope - beta).abs() <= 0.02, "{} vs {}", fit.slope, beta);
        }
    }
}
