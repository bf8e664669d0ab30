//! `X_n = sum_{k=0}^n eta(S_k) = sum_x l_n(x) eta(x)`.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::estimate::MeanEstimate;
use crate::math::{exact_sum, sqrt};
use crate::rng::{self, tag, Executor};
use crate::scenery::{SceneryDistribution, SceneryField};
use crate::walk::{LocalTimeField, WalkConfig, Walker};

/// A walk's local times, the scenery on its range and the resulting `X_n`.
#[derive(Debug, Clone)]
pub struct RwrsSample {
    pub local_times: LocalTimeField,
    /// `eta(x)` for each site of the range, in first-visit order.
    pub scenery_values: Vec<f64>,
    pub x_n: f64,
}

/// `sum_x l(x) eta(x)` over the support of `lt`, correctly rounded.
pub fn evaluate_x(lt: &LocalTimeField, scenery: &mut SceneryField) -> f64 {
    exact_sum(lt.iter().map(|(s, l)| l as f64 * scenery.value(&s)))
}

/// Local times of an `n`-step walk driven by `walker`, reusing `lt`.
pub fn fill_local_times<R: rand::RngCore>(walker: &mut Walker<R>, n: usize, lt: &mut LocalTimeField) {
    lt.clear();
    walker.set_position(crate::walk::Site::ORIGIN);
    lt.visit(walker.position());
    for _ in 0..n {
        lt.visit(walker.step());
    }
}

/// Replica `index` of the `(seed)` family of RWRS samples.
pub fn sample_rwrs_replica(config: WalkConfig, dist: &SceneryDistribution, n: usize, seed: u64, index: u64) -> RwrsSample {
    let mut walker = Walker::new(config, rng::stream(seed, tag::RWRS, index));
    let mut lt = LocalTimeField::new();
    fill_local_times(&mut walker, n, &mut lt);
    let mut field = SceneryField::keyed(dist.clone(), rng::replica_seed(seed, tag::SCENERY, index));
    let scenery_values: Vec<f64> = lt.iter().map(|(s, _)| field.value(&s)).collect();
    let x_n = exact_sum(lt.iter().zip(&scenery_values).map(|((_, l), v)| l as f64 * v));
    RwrsSample {
        local_times: lt,
        scenery_values,
        x_n,
    }
}

/// One seeded sample; scenery is drawn only on visited sites.
pub fn sample_rwrs(config: WalkConfig, dist: &SceneryDistribution, n: usize, seed: u64) -> RwrsSample {
    sample_rwrs_replica(config, dist, n, seed, 0)
}

/// `E[X_n^2]` estimated directly and through `E[eta^2] E[sum_x l_n(x)^2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoment {
    pub direct: MeanEstimate,
    pub decoupled: MeanEstimate,
    /// Paired mean of `X_n^2 - E[eta^2] sum_x l_n(x)^2`, zero in expectation.
    pub difference: MeanEstimate,
}

impl SecondMoment {
    /// `|difference| / se(difference)`.
    pub fn decoupling_z(&self) -> f64 {
        if self.difference.std_error == 0.0 {
            0.0
        } else {
            self.difference.mean.abs() / self.difference.std_error
        }
    }
}

pub fn second_moment<E: Executor>(
    config: WalkConfig,
    dist: &SceneryDistribution,
    n: usize,
    replicas: usize,
    seed: u64,
    exec: &E,
) -> Result<SecondMoment> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if replicas < 2 {
        return Err(invalid("at least two replicas are needed"));
    }
    let var = dist.variance();
    let pairs = exec.map(replicas, |i| {
        let s = sample_rwrs_replica(config, dist, n, seed, i as u64);
        (s.x_n * s.x_n, var * s.local_times.self_intersection() as f64)
    });
    let direct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let decoupled: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(SecondMoment {
        direct: MeanEstimate::from_samples(&direct),
        decoupled: MeanEstimate::from_samples(&decoupled),
        difference: MeanEstimate::from_samples(&diff),
    })
}

/// Kolmogorov–Smirnov distance between the samples and their negatives,
/// scaled by `sqrt(m/2)` so it is comparable to the two-sample critical value.
pub fn symmetry_statistic(values: &[f64]) -> f64 {
    let mut a: Vec<f64> = values.to_vec();
    let mut b: Vec<f64> = values.iter().map(|v| -v).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let m = a.len();
    let (mut i, mut j, mut worst) = (0, 0, 0.0_f64);
    while i < m && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        worst = worst.max((i as f64 - j as f64).abs() / m as f64);
    }
    worst * sqrt(m as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::Site;

    #[test]
    fn hand_arithmetic() {
        let s = |x| Site::from_coords(&[x]);
        let lt = LocalTimeField::from_counts([(s(0), 2), (s(1), 2)]).unwrap();
        let mut field = SceneryField::fixed([(s(0), 1.5), (s(1), -0.5)]);
        assert_eq!(evaluate_x(&lt, &mut field), 2.0);
        let mut zero = SceneryField::fixed([]);
        assert_eq!(evaluate_x(&lt, &mut zero), 0.0);
    }

    #[test]
    fn zero_steps_is_one_draw() {
        let d = SceneryDistribution::new(1.5, 1.0).unwrap();
        let cfg = WalkConfig::simple(3).unwrap();
        let s = sample_rwrs(cfg, &d, 0, 5);
        assert_eq!(s.scenery_values.len(), 1);
        assert_eq!(s.x_n, s.scenery_values[0]);
        assert_eq!(sample_rwrs(cfg, &d, 200, 5).x_n, sample_rwrs(cfg, &d, 200, 5).x_n);
    }
}
