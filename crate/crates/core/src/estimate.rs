//! Probability and mean estimates with their Monte Carlo error.

use crate::math::{exp, log, log_sum_exp, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    Naive,
    Tilted,
    LowerBound,
}

impl EstimatorId {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Naive => "naive",
            EstimatorId::Tilted => "tilted",
            EstimatorId::LowerBound => "lower-bound",
        }
    }
}

/// A probability estimate kept in log space.
///
/// `relative_variance` is `Var(p_hat) / p_hat^2`, so the standard error of
/// `log p_hat` is its square root to first order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub log_probability: f64,
    pub relative_variance: f64,
    pub replicas: u64,
    /// Replicas with a nonzero contribution.
    pub hits: u64,
    pub estimator: EstimatorId,
    pub seed: u64,
}

impl TailEstimate {
    /// Hit frequency with binomial variance.
    pub fn from_counts(hits: u64, replicas: u64, estimator: EstimatorId, seed: u64) -> Self {
        let (log_probability, relative_variance) = if hits == 0 || replicas == 0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            let p = hits as f64 / replicas as f64;
            (log(p), (1.0 - p) / (p * replicas as f64))
        };
        TailEstimate {
            log_probability,
            relative_variance,
            replicas,
            hits,
            estimator,
            seed,
        }
    }

    /// Sample mean of nonnegative weights given by their logs (`-inf` = 0).
    pub fn from_log_weights(log_weights: &[f64], estimator: EstimatorId, seed: u64) -> Self {
        let n = log_weights.len();
        let hits = log_weights.iter().filter(|w| w.is_finite()).count() as u64;
        let mut est = TailEstimate {
            log_probability: f64::NEG_INFINITY,
            relative_variance: f64::INFINITY,
            replicas: n as u64,
            hits,
            estimator,
            seed,
        };
        if hits == 0 {
            return est;
        }
        let ln_n = log(n as f64);
        let log_m1 = log_sum_exp(log_weights.iter().copied()) - ln_n;
        let log_m2 = log_sum_exp(log_weights.iter().map(|w| 2.0 * w)) - ln_n;
        est.log_probability = log_m1;
        est.relative_variance = if n > 1 {
            ((exp(log_m2 - 2.0 * log_m1) - 1.0) / (n - 1) as f64).max(0.0)
        } else {
            f64::INFINITY
        };
        est
    }

    /// An analytic value with no sampling error.
    pub fn exact(log_probability: f64, estimator: EstimatorId, seed: u64) -> Self {
        TailEstimate {
            log_probability,
            relative_variance: 0.0,
            replicas: 0,
            hits: 0,
            estimator,
            seed,
        }
    }

    pub fn probability(&self) -> f64 {
        exp(self.log_probability)
    }

    pub fn variance(&self) -> f64 {
        let p = self.probability();
        if p == 0.0 {
            0.0
        } else {
            self.relative_variance * p * p
        }
    }

    pub fn std_error(&self) -> f64 {
        sqrt(self.variance())
    }

    /// First-order standard error of `log p_hat`.
    pub fn log_std_error(&self) -> f64 {
        sqrt(self.relative_variance)
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: u64,
}

impl MeanEstimate {
    pub fn from_sums(sum: f64, sum_sq: f64, replicas: u64) -> Self {
        let n = replicas as f64;
        let mean = sum / n;
        let var = if replicas > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            std_error: sqrt(var / n),
            replicas,
        }
    }

    pub fn from_samples(values: &[f64]) -> Self {
        let (mean, se) = crate::math::mean_and_se(values);
        MeanEstimate {
            mean,
            std_error: se,
            replicas: values.len() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_weights_match_counts_for_indicators() {
        let w = [0.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        let a = TailEstimate::from_log_weights(&w, EstimatorId::Naive, 1);
        let b = TailEstimate::from_counts(2, 4, EstimatorId::Naive, 1);
        assert!((a.probability() - 0.5).abs() < 1e-15);
        // sample variance uses n-1, binomial uses n
        assert!((a.relative_variance - 1.0 / 3.0).abs() < 1e-12);
        assert!((b.relative_variance - 0.25).abs() < 1e-12);
    }

    #[test]
    fn all_zero_weights() {
        let e = TailEstimate::from_log_weights(&[f64::NEG_INFINITY; 3], EstimatorId::Tilted, 0);
        assert_eq!(e.probability(), 0.0);
        assert_eq!(e.hits, 0);
    }
}
