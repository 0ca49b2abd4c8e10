use serde::Serialize;

use crate::error::{Error, Result};

/// Empirical CDF: the i-th order statistic (1-based) paired with `i/n`.
pub fn cdf_points(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Domain("cdf of an empty sample".into()));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("cdf sample contains NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect())
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean-of-ratio inputs: `mean(num) / mean(den)` over paired samples,
/// `None` when the denominator mean is zero or nothing is paired.
pub fn paired_mean_ratio(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let num: f64 = pairs.iter().map(|p| p.0).sum();
    let den: f64 = pairs.iter().map(|p| p.1).sum();
    (den != 0.0 && den.is_finite()).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub sigma_e2: f64,
    pub numerator: String,
    pub denominator: String,
    /// `None` when the denominator's mean min-rate is zero.
    pub ratio: Option<f64>,
    pub paired_trials: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample() {
        assert_eq!(cdf_points(&[5.0]).unwrap(), vec![(5.0, 1.0)]);
    }

    #[test]
    fn quartiles() {
        let c = cdf_points(&[3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(c.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(cdf_points(&[]).is_err());
    }

    #[test]
    fn ratio_edge_cases() {
        assert_eq!(paired_mean_ratio(&[(2.0, 2.0), (4.0, 4.0)]), Some(1.0));
        assert_eq!(paired_mean_ratio(&[(1.0, 0.0)]), None);
        assert_eq!(paired_mean_ratio(&[]), None);
    }
}
